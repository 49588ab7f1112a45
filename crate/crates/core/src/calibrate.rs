//! Learning per-stratum mobility and deterrence weights from counts.
//!
//! Only two weights per demand stratum are free, so the OD matrices keep
//! the structure implied by zonal attributes and travel costs. The
//! objective is the mean GEH over counted links; there is no analytic
//! gradient, so the search is derivative-free.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{assign_iterative, AssignmentMode, AssignmentOptions, RouteTable};
use crate::demand::{distribute_with, DemandStratum, DeterrenceKind};
use crate::error::{Error, Result};
use crate::metrics::{mean_geh, split_counts, SplitExperimentResult, TrafficCount};
use crate::model::Model;
use crate::network::{anchor_trees, skim_from_trees, CostMatrix, FlowMap};
use crate::optim::{nelder_mead, simulated_annealing, AnnealingOptions, NelderMeadOptions, OptimOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Mu,
    Beta,
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::Mu => "mu",
            Param::Beta => "beta",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    pub stratum: String,
    pub param: Param,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightBounds {
    pub mu: (f64, f64),
    pub beta_exponential: (f64, f64),
    pub beta_power: (f64, f64),
}

impl Default for WeightBounds {
    fn default() -> Self {
        Self {
            mu: (0.0, 5.0),
            beta_exponential: (0.0, 1.0),
            beta_power: (0.0, 5.0),
        }
    }
}

impl WeightBounds {
    fn beta(&self, kind: DeterrenceKind) -> (f64, f64) {
        match kind {
            DeterrenceKind::Exponential => self.beta_exponential,
            DeterrenceKind::Power => self.beta_power,
        }
    }
}

/// `(mu, beta)` for every stratum, in stratum order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub entries: Vec<Weight>,
}

impl WeightVector {
    pub fn from_strata(strata: &[DemandStratum], bounds: &WeightBounds) -> Result<Self> {
        let mut entries = Vec::with_capacity(2 * strata.len());
        for s in strata {
            for (param, value, (lower, upper)) in [
                (Param::Mu, s.mu, bounds.mu),
                (Param::Beta, s.beta, bounds.beta(s.deterrence)),
            ] {
                if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
                    return Err(Error::Config(format!(
                        "bounds [{lower}, {upper}] for {}:{param} are not finite and ordered",
                        s.name
                    )));
                }
                if !(value >= lower && value <= upper) {
                    return Err(Error::Config(format!(
                        "initial {}:{param} = {value} is outside [{lower}, {upper}]",
                        s.name
                    )));
                }
                entries.push(Weight {
                    stratum: s.name.clone(),
                    param,
                    value,
                    lower,
                    upper,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|w| w.value).collect()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|w| (w.lower, w.upper)).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|w| format!("{}:{}", w.stratum, w.param))
            .collect()
    }

    /// Copy with new values, clipped to the bounds.
    pub fn with_values(&self, values: &[f64]) -> Self {
        let entries = self
            .entries
            .iter()
            .zip(values)
            .map(|(w, v)| Weight {
                value: v.clamp(w.lower, w.upper),
                ..w.clone()
            })
            .collect();
        Self { entries }
    }

    /// Write the weights into `strata`, matched by position.
    pub fn apply(&self, strata: &mut [DemandStratum]) {
        apply_values(&self.values(), strata);
    }
}

fn apply_values(values: &[f64], strata: &mut [DemandStratum]) {
    for (s, pair) in strata.iter_mut().zip(values.chunks_exact(2)) {
        s.mu = pair[0];
        s.beta = pair[1];
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    NelderMead,
    SimulatedAnnealing,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::NelderMead => "nelder_mead",
            Method::SimulatedAnnealing => "simulated_annealing",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationOptions {
    pub method: Method,
    pub bounds: WeightBounds,
    pub seed: u64,
    pub nelder_mead: NelderMeadOptions,
    pub annealing: AnnealingOptions,
    /// Assignment used inside the optimization loop.
    pub inner: AssignmentOptions,
    /// Also evaluate the calibrated weights with iterative assignment.
    pub report_iterative: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            method: Method::NelderMead,
            bounds: WeightBounds::default(),
            seed: 0,
            nelder_mead: NelderMeadOptions::default(),
            annealing: AnnealingOptions::default(),
            inner: AssignmentOptions::one_off(),
            report_iterative: true,
        }
    }
}

/// Pipeline from weights to mean GEH against a fixed set of counts.
///
/// In one-off mode link times never depend on flows, so the free-flow skim
/// and routes are computed once and reused for every evaluation.
pub struct Objective<'a> {
    model: &'a Model,
    counts: &'a [TrafficCount],
    assignment: AssignmentOptions,
    free_flow: Option<(CostMatrix, RouteTable)>,
}

impl<'a> Objective<'a> {
    pub fn new(model: &'a Model, counts: &'a [TrafficCount], assignment: AssignmentOptions) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Domain("no traffic counts: objective is undefined".into()));
        }
        for c in counts {
            if model.network.link_index(&c.link_id).is_none() {
                return Err(Error::Domain(format!("count references unknown link {}", c.link_id)));
            }
        }
        let free_flow = match assignment.mode {
            AssignmentMode::OneOff => {
                let trees = anchor_trees(&model.network, &model.network.free_flow_times())?;
                Some((
                    skim_from_trees(&model.network, &trees)?,
                    RouteTable::from_trees(&model.network, &trees)?,
                ))
            }
            AssignmentMode::Iterative => None,
        };
        Ok(Self {
            model,
            counts,
            assignment,
            free_flow,
        })
    }

    /// Total link flows for the given strata.
    pub fn flows(&self, strata: &[DemandStratum]) -> Result<FlowMap> {
        match &self.free_flow {
            Some((costs, routes)) => {
                let net = &self.model.network;
                let mut total = FlowMap::zeros(net);
                for s in strata {
                    let od = distribute_with(&self.model.zones, s, costs, &self.assignment.furness)?;
                    total.add(&routes.load(net, &od)?)?;
                }
                Ok(total)
            }
            None => Ok(assign_iterative(&self.model.network, &self.model.zones, strata, &self.assignment)?.flows),
        }
    }

    /// Mean GEH with the model strata reweighted by `values`
    /// (`[mu_0, beta_0, mu_1, beta_1, ...]`).
    pub fn eval(&self, values: &[f64]) -> Result<f64> {
        let mut strata = self.model.strata.clone();
        apply_values(values, &mut strata);
        self.flows(&strata)
            .and_then(|flows| mean_geh(&flows, self.counts))
            .map_err(|e| Error::Objective {
                weights: values.to_vec(),
                source: Box::new(e),
            })
    }
}

impl Objective<'_> {
    /// [`Objective::eval`] as seen by the optimizers: weights whose OD
    /// balancing does not converge score `+inf` instead of aborting the
    /// search.
    pub fn eval_for_search(&self, values: &[f64]) -> Result<f64> {
        match self.eval(values) {
            Err(Error::Objective { weights, source }) if matches!(*source, Error::NotConverged { .. }) => {
                log::warn!("weights {weights:?} rejected: {source}");
                Ok(f64::INFINITY)
            }
            other => other,
        }
    }
}

/// Mean GEH of the model run with `weights` against the model's counts.
pub fn objective_fn(weights: &WeightVector, model: &Model, assignment: &AssignmentOptions) -> Result<f64> {
    Objective::new(model, &model.counts, *assignment)?.eval(&weights.values())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryEntry {
    pub evaluation: usize,
    pub objective: f64,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    pub best_weights: WeightVector,
    pub best_objective: f64,
    pub initial_objective: f64,
    pub history: Vec<HistoryEntry>,
    pub n_evaluations: usize,
    pub method: Method,
    pub converged: bool,
    /// Objective of the best weights under iterative assignment.
    pub iterative_objective: Option<f64>,
}

impl CalibrationResult {
    fn from_outcome(initial: &WeightVector, outcome: OptimOutcome, method: Method) -> Self {
        let history: Vec<HistoryEntry> = outcome
            .history
            .into_iter()
            .map(|e| HistoryEntry {
                evaluation: e.index,
                objective: e.objective,
                weights: e.point,
            })
            .collect();
        Self {
            best_weights: initial.with_values(&outcome.best_point),
            best_objective: outcome.best_objective,
            initial_objective: history[0].objective,
            n_evaluations: history.len(),
            history,
            method,
            converged: outcome.converged,
            iterative_objective: None,
        }
    }

    /// The given strata with the calibrated weights written in.
    pub fn calibrated_strata(&self, strata: &[DemandStratum]) -> Vec<DemandStratum> {
        let mut out = strata.to_vec();
        self.best_weights.apply(&mut out);
        out
    }

    /// Running minimum of the objective over the history.
    pub fn running_best(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.history
            .iter()
            .map(|h| {
                best = best.min(h.objective);
                best
            })
            .collect()
    }
}

/// Calibrate the model strata against the model counts.
pub fn calibrate(model: &Model, opts: &CalibrationOptions) -> Result<CalibrationResult> {
    calibrate_against(model, &model.counts, opts)
}

/// Calibrate the model strata against an explicit set of counts.
pub fn calibrate_against(
    model: &Model,
    counts: &[TrafficCount],
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    if model.strata.is_empty() {
        return Err(Error::Config("calibration needs at least one stratum".into()));
    }
    let initial = WeightVector::from_strata(&model.strata, &opts.bounds)?;
    let objective = Objective::new(model, counts, opts.inner)?;
    let f = |x: &[f64]| objective.eval_for_search(x);
    let x0 = initial.values();
    let bounds = initial.bounds();
    let outcome = match opts.method {
        Method::NelderMead => nelder_mead(f, &x0, &bounds, &opts.nelder_mead)?,
        Method::SimulatedAnnealing => simulated_annealing(f, &x0, &bounds, opts.seed, &opts.annealing)?,
    };
    let mut result = CalibrationResult::from_outcome(&initial, outcome, opts.method);
    if opts.report_iterative && opts.inner.mode == AssignmentMode::OneOff {
        let iterative = AssignmentOptions {
            mode: AssignmentMode::Iterative,
            ..model.assignment
        };
        let strata = result.calibrated_strata(&model.strata);
        let flows = assign_iterative(&model.network, &model.zones, &strata, &iterative)?.flows;
        result.iterative_objective = Some(mean_geh(&flows, counts)?);
    }
    Ok(result)
}

/// Calibrate on a seeded train split and score the held-out counts, for
/// every `(fraction, seed)` pair. Rows come back ordered by fraction, then
/// seed.
pub fn split_test(
    model: &Model,
    fractions: &[f64],
    seeds: &[u64],
    opts: &CalibrationOptions,
) -> Result<Vec<SplitExperimentResult>> {
    let opts = CalibrationOptions {
        report_iterative: false,
        ..opts.clone()
    };
    let grid: Vec<(f64, u64)> = fractions
        .iter()
        .flat_map(|&f| seeds.iter().map(move |&s| (f, s)))
        .collect();
    grid.par_iter()
        .map(|&(fraction, seed)| {
            let (train, test) = split_counts(&model.counts, fraction, seed)?;
            let run_opts = CalibrationOptions {
                seed,
                ..opts.clone()
            };
            let result = calibrate_against(model, &train, &run_opts)?;
            let strata = result.calibrated_strata(&model.strata);
            let test_objective = Objective::new(model, &test, opts.inner)?;
            let test_geh = mean_geh(&test_objective.flows(&strata)?, &test)?;
            Ok(SplitExperimentResult {
                split_fraction: fraction,
                seed,
                train_geh: result.best_objective,
                test_geh,
            })
        })
        .collect()
}
