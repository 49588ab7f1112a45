#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowfit::assignment::AssignmentMode;
use flowfit::calibrate::{calibrate, split_test, Method};
use flowfit::io::{
    load_model, read_weights, write_compare_csv, write_flows_csv, write_history_csv, write_od_csv,
    write_report, write_scatter_csv, write_split_csv, write_weights,
};
use flowfit::{apply_scenario, assign_iterative, Error, Model, Result};

/// Calibrate three-step transport models against traffic counts.
#[derive(Parser)]
#[command(name = "flowfit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Model spec (TOML).
    spec: PathBuf,
    /// Directory for all written outputs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct WeightsArg {
    /// Weights file from `calibrate`, replacing the spec's strata weights.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and cross-check a model; exit 0 iff it is clean.
    Validate {
        /// Model spec (TOML).
        spec: PathBuf,
    },
    /// Assign demand and write flows.csv and od.csv.
    Assign {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        weights: WeightsArg,
        /// Override the assignment mode: one_off or iterative.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<AssignmentMode>,
    },
    /// Compare assigned flows with counts; writes report.txt and scatter.csv.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        weights: WeightsArg,
    },
    /// Fit stratum weights; writes result.txt, history.csv and weights.toml.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Override the method: nelder_mead or simulated_annealing.
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        /// Override the random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Calibrate on train splits and score held-out counts; writes split.csv.
    SplitTest {
        #[command(flatten)]
        common: Common,
        /// Train fractions: `a..b` (step 0.1), `a..b:step` or a comma list.
        #[arg(long, default_value = "0.3..0.9", value_parser = parse_fractions)]
        fractions: Fractions,
        /// Number of seeds per fraction, 0..N.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Per-link flow change of a scenario under fixed weights; writes compare.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        weights: WeightsArg,
        /// Scenario name from the spec.
        #[arg(long)]
        scenario: String,
    },
}

#[derive(Clone, Debug)]
struct Fractions(Vec<f64>);

fn parse_mode(s: &str) -> std::result::Result<AssignmentMode, String> {
    match s {
        "one_off" | "one-off" => Ok(AssignmentMode::OneOff),
        "iterative" => Ok(AssignmentMode::Iterative),
        _ => Err(format!("unknown mode {s:?}")),
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s {
        "nelder_mead" | "nelder-mead" => Ok(Method::NelderMead),
        "simulated_annealing" | "simulated-annealing" => Ok(Method::SimulatedAnnealing),
        _ => Err(format!("unknown method {s:?}")),
    }
}

fn parse_fractions(s: &str) -> std::result::Result<Fractions, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad fraction {t:?}"));
    let values = if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, step)) => (num(b)?, num(step)?),
            None => (num(rest)?, 0.1),
        };
        let a = num(a)?;
        if !(step > 0.0) || b < a {
            return Err(format!("bad range {s:?}"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        s.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?
    };
    if values.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        return Err(format!("fractions must lie in (0, 1): {s:?}"));
    }
    Ok(Fractions(values))
}

fn with_weights(model: Model, weights: &WeightsArg) -> Result<Model> {
    let Some(path) = &weights.weights else {
        return Ok(model);
    };
    let strata = read_weights(path)?;
    let names = |s: &[flowfit::DemandStratum]| s.iter().map(|s| s.name.clone()).collect::<Vec<_>>();
    if names(&strata) != names(&model.strata) {
        return Err(Error::Config(format!(
            "{} lists strata {:?}, the model has {:?}",
            path.display(),
            names(&strata),
            names(&model.strata)
        )));
    }
    Ok(model.with_strata(strata))
}

fn print_weights(model: &Model) {
    for s in &model.strata {
        println!("  {:<20} mu = {:.6}  beta = {:.6}", s.name, s.mu, s.beta);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { spec } => {
            let model = load_model(&spec)?;
            println!(
                "{}: ok ({} zones, {} nodes, {} links, {} counts, {} strata)",
                spec.display(),
                model.zones.len(),
                model.network.nodes().len(),
                model.network.links().len(),
                model.counts.len(),
                model.strata.len()
            );
        }
        Command::Assign { common, weights, mode } => {
            let model = with_weights(load_model(&common.spec)?, &weights)?;
            let mut opts = model.assignment;
            if let Some(mode) = mode {
                opts.mode = mode;
            }
            let result = model.assign_with(&opts)?;
            write_flows_csv(&common.out.join("flows.csv"), &result)?;
            write_od_csv(&common.out.join("od.csv"), &result.od_matrices)?;
            println!(
                "assigned {:.1} veh/24h link flow in {} iteration(s), relative gap {:e}",
                result.flows.total(),
                result.iterations,
                result.relative_gap
            );
        }
        Command::Evaluate { common, weights } => {
            let model = with_weights(load_model(&common.spec)?, &weights)?;
            let report = model.evaluate()?;
            write_report(&common.out.join("report.txt"), &report)?;
            write_scatter_csv(&common.out.join("scatter.csv"), &report)?;
            print!("{report}");
        }
        Command::Calibrate { common, method, seed } => {
            let model = load_model(&common.spec)?;
            let mut opts = model.calibration.clone();
            if let Some(m) = method {
                opts.method = m;
            }
            if let Some(s) = seed {
                opts.seed = s;
            }
            let result = calibrate(&model, &opts)?;
            let fitted = model.with_strata(result.calibrated_strata(&model.strata));
            write_history_csv(&common.out.join("history.csv"), &result)?;
            write_weights(&common.out.join("weights.toml"), &fitted.strata)?;
            let mut text = format!(
                "method            {}\nseed              {}\nevaluations       {}\nconverged         {}\ninitial J         {:.6}\nbest J            {:.6}\n",
                result.method, opts.seed, result.n_evaluations, result.converged, result.initial_objective, result.best_objective
            );
            if let Some(j) = result.iterative_objective {
                text.push_str(&format!("iterative J       {j:.6}\n"));
            }
            for s in &fitted.strata {
                text.push_str(&format!("{}:mu = {}\n{}:beta = {}\n", s.name, s.mu, s.name, s.beta));
            }
            write_text(&common.out.join("result.txt"), &text)?;
            println!("best J = {:.6} after {} evaluations (seed {})", result.best_objective, result.n_evaluations, opts.seed);
            print_weights(&fitted);
        }
        Command::SplitTest { common, fractions, seeds } => {
            let model = load_model(&common.spec)?;
            let seeds: Vec<u64> = (0..seeds).collect();
            let rows = split_test(&model, &fractions.0, &seeds, &model.calibration)?;
            write_split_csv(&common.out.join("split.csv"), &rows)?;
            for f in &fractions.0 {
                let test: Vec<f64> = rows.iter().filter(|r| r.split_fraction == *f).map(|r| r.test_geh).collect();
                let mean = test.iter().sum::<f64>() / test.len() as f64;
                println!("fraction {f:.2}: mean test GEH {mean:.4} over {} seeds", test.len());
            }
        }
        Command::Compare { common, weights, scenario } => {
            let model = with_weights(load_model(&common.spec)?, &weights)?;
            let scenario = model
                .scenarios
                .iter()
                .find(|s| s.name == scenario)
                .ok_or_else(|| Error::Config(format!("no scenario named {scenario:?} in the spec")))?;
            let edited = apply_scenario(&model.network, scenario)?;
            let base = model.assign()?.flows;
            let after = assign_iterative(&edited, &model.zones, &model.strata, &model.assignment)?.flows;
            write_compare_csv(&common.out.join("compare.csv"), &base, &after)?;
            println!(
                "scenario {}: total link flow {:.1} -> {:.1} veh/24h",
                scenario.name,
                base.total(),
                after.total()
            );
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Searches visit many zero-mobility points; per-evaluation warnings drown the output.
    let filter = match cli.command {
        Command::Calibrate { .. } | Command::SplitTest { .. } => "warn,flowfit::demand=error",
        _ => "warn",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(filter)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
