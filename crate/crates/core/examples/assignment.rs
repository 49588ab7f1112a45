//! One-off all-or-nothing assignment against the iterative loop that feeds
//! congested times back into distribution.
//!
//! cargo run --example assignment

use flowfit::assignment::{assign_iterative, AssignmentOptions};
use flowfit::demand::DemandStratum;
use flowfit::synthetic::toy_model;

fn main() -> flowfit::Result<()> {
    let model = toy_model(0.0, 0)?;
    // High mobility so the ring saturates.
    let strata = [DemandStratum::new("pop-pop", "population", "population", 2.5, 0.074)];
    let one_off = assign_iterative(&model.network, &model.zones, &strata, &AssignmentOptions::one_off())?;
    let iterative = assign_iterative(
        &model.network,
        &model.zones,
        &strata,
        &AssignmentOptions {
            n_outer: 30,
            ..AssignmentOptions::default()
        },
    )?;
    println!(
        "iterative: {} iterations, converged {}, relative gap {:.2e}",
        iterative.iterations, iterative.converged, iterative.relative_gap
    );
    println!("{:<8} {:>10} {:>10} {:>8}", "link", "one-off", "iterative", "t/t0");
    let t0 = model.network.free_flow_times();
    for (i, (id, q)) in iterative.flows.iter().enumerate() {
        println!(
            "{id:<8} {:>10.0} {q:>10.0} {:>8.3}",
            one_off.flows.values()[i],
            iterative.link_times[i] / t0[i]
        );
    }
    Ok(())
}
