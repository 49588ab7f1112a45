//! Recover known weights on the eight-zone toy network, with and without
//! count noise.
//!
//! cargo run --release --example calibrate_toy

use flowfit::calibrate::{calibrate, CalibrationOptions};
use flowfit::synthetic::{toy_model, TOY_TRUE_BETA, TOY_TRUE_MU};

fn main() -> flowfit::Result<()> {
    for noise in [0.0, 0.05] {
        let model = toy_model(noise, 7)?;
        let result = calibrate(&model, &CalibrationOptions::default())?;
        let w = result.best_weights.values();
        println!(
            "noise {noise:.2}: J {:.4} -> {:.4} in {} evaluations, mu {:.4} (true {TOY_TRUE_MU}), beta {:.5} (true {TOY_TRUE_BETA})",
            result.initial_objective, result.best_objective, result.n_evaluations, w[0], w[1]
        );
    }
    Ok(())
}
