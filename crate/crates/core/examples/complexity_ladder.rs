//! Grow the model one demand stratum at a time, warm-starting each rung
//! from the previous calibration.
//!
//! The added stratum starts with zero mobility, so the first evaluation of
//! each rung reproduces the previous optimum.
//!
//! cargo run --release --example complexity_ladder

use flowfit::calibrate::{calibrate, CalibrationOptions};
use flowfit::demand::DemandStratum;
use flowfit::synthetic::{regional_model, RegionalConfig};

fn main() -> flowfit::Result<()> {
    let truth = [
        DemandStratum::new("pop-jobs", "population", "jobs", 0.6, 0.05),
        DemandStratum::new("pop-pop", "population", "population", 0.5, 0.12),
    ];
    let start = [DemandStratum::new("pop-jobs", "population", "jobs", 1.5, 0.1)];
    let model = regional_model(&RegionalConfig::default(), &truth, &start)?;
    let opts = CalibrationOptions::default();

    let one = calibrate(&model, &opts)?;
    let mut strata = one.calibrated_strata(&model.strata);
    println!("1 stratum : J {:.4} -> {:.4}", one.initial_objective, one.best_objective);

    strata.push(DemandStratum::new("pop-pop", "population", "population", 0.0, 0.1));
    let two = calibrate(&model.with_strata(strata.clone()), &opts)?;
    println!("2 strata  : J {:.4} -> {:.4}", two.initial_objective, two.best_objective);
    for s in two.calibrated_strata(&strata) {
        println!("  {:<9} mu {:.4}  beta {:.4}", s.name, s.mu, s.beta);
    }
    Ok(())
}
