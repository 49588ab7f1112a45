//! Trip generation and doubly constrained gravity distribution, and how the
//! deterrence weight shortens the mean trip.
//!
//! cargo run --example gravity_distribution

use flowfit::demand::{distribute, generate_trip_ends, DemandStratum, DeterrenceKind};
use flowfit::network::skim_matrix;
use flowfit::synthetic::toy_model;

fn main() -> flowfit::Result<()> {
    let model = toy_model(0.0, 0)?;
    let costs = skim_matrix(&model.network, &model.network.free_flow_times())?;
    let stratum = DemandStratum::new("pop-pop", "population", "population", 0.7, 0.074);
    let ends = generate_trip_ends(&model.zones, &stratum)?;
    println!("generated {:.0} trips/24h", ends.total());

    let od = distribute(&model.zones, &stratum, &costs)?;
    for (i, (target, got)) in ends.origins.iter().zip(od.row_sums()).enumerate() {
        println!("  {}: O = {target:>9.1}  row sum = {got:>9.1}", od.zone_ids[i]);
    }

    println!("mean trip time by deterrence weight:");
    for kind in [DeterrenceKind::Exponential, DeterrenceKind::Power] {
        for beta in [0.0, 0.05, 0.1, 0.2, 0.4] {
            let s = stratum.clone().with_deterrence(kind);
            let od = distribute(&model.zones, &DemandStratum { beta, ..s }, &costs)?;
            println!("  {kind:<11} beta {beta:<4}: {:.2} min", od.mean_cost(&costs));
        }
    }
    Ok(())
}
