//! Score predicted flows against counts with the GEH statistic.
//!
//! cargo run --example geh_evaluation

use flowfit::metrics::{geh_from_daily, geh_hourly};
use flowfit::synthetic::{toy_model, toy_stratum, TOY_INITIAL_BETA, TOY_INITIAL_MU, TOY_TRUE_BETA, TOY_TRUE_MU};

fn main() -> flowfit::Result<()> {
    println!("GEH(100 vs 50 veh/h)          = {:.4}", geh_hourly(100.0, 50.0)?);
    println!("GEH(1000 vs 500 veh/24h)      = {:.4}", geh_from_daily(1000.0, 500.0)?);

    let model = toy_model(0.05, 1)?;
    for (label, mu, beta) in [
        ("initial", TOY_INITIAL_MU, TOY_INITIAL_BETA),
        ("truth", TOY_TRUE_MU, TOY_TRUE_BETA),
    ] {
        let report = model.with_strata(vec![toy_stratum(mu, beta)]).evaluate()?;
        println!("\n{label} weights (mu {mu}, beta {beta}):\n{report}");
    }
    Ok(())
}
