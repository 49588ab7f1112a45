//! Predict the effect of a new bypass road under fixed weights.
//!
//! cargo run --example scenario_bypass

use flowfit::network::{skim_matrix, Link};
use flowfit::scenario::{apply_scenario, NetworkEdit, Scenario};
use flowfit::synthetic::{toy_model, toy_stratum, TOY_TRUE_BETA, TOY_TRUE_MU};
use flowfit::{assign_iterative, AssignmentOptions};

fn main() -> flowfit::Result<()> {
    let model = toy_model(0.0, 0)?.with_strata(vec![toy_stratum(TOY_TRUE_MU, TOY_TRUE_BETA)]);
    let bypass = Scenario::new(
        "bypass",
        vec![
            NetworkEdit::AddLink(Link::new("n2-n5", "n2", "n5", 16.0, 20000.0)),
            NetworkEdit::AddLink(Link::new("n5-n2", "n5", "n2", 16.0, 20000.0)),
        ],
    );
    let edited = apply_scenario(&model.network, &bypass)?;
    let before = skim_matrix(&model.network, &model.network.free_flow_times())?;
    let after = skim_matrix(&edited, &edited.free_flow_times())?;
    println!("Z2 -> Z5 free-flow time: {:.1} -> {:.1} min", before.get(2, 5), after.get(2, 5));

    let opts = AssignmentOptions::default();
    let base = assign_iterative(&model.network, &model.zones, &model.strata, &opts)?.flows;
    let new = assign_iterative(&edited, &model.zones, &model.strata, &opts)?.flows;
    println!("{:<8} {:>9} {:>9} {:>9}", "link", "base", "bypass", "delta");
    for (id, q) in new.iter() {
        let b = base.get(id).unwrap_or(0.0);
        if (q - b).abs() > 0.5 {
            println!("{id:<8} {b:>9.0} {q:>9.0} {:>+9.0}", q - b);
        }
    }
    Ok(())
}
