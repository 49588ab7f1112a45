//! GEH statistics, the calibration objective and train/test splits.
//!
//! Flows and counts are stored per 24h; GEH values are always reported in
//! hourly-equivalent units by dividing daily flows by ten.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::FlowMap;

/// Ratio between daily and typical hourly flows.
pub const DAILY_TO_HOURLY: f64 = 10.0;
pub const GEH_THRESHOLD: f64 = 5.0;

/// An observed directional flow (veh/24h) on one link.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficCount {
    pub link_id: String,
    pub observed: f64,
}

impl TrafficCount {
    pub fn new(link_id: impl Into<String>, observed: f64) -> Self {
        Self {
            link_id: link_id.into(),
            observed,
        }
    }
}

pub fn geh_hourly(predicted: f64, measured: f64) -> Result<f64> {
    if !(predicted >= 0.0) || !(measured >= 0.0) {
        return Err(Error::Domain(format!(
            "GEH needs nonnegative flows, got predicted {predicted}, measured {measured}"
        )));
    }
    let sum = predicted + measured;
    if sum == 0.0 {
        return Ok(0.0);
    }
    let diff = predicted - measured;
    Ok((2.0 * diff * diff / sum).sqrt())
}

/// Hourly-equivalent GEH of daily flows.
pub fn geh_from_daily(predicted_daily: f64, measured_daily: f64) -> Result<f64> {
    geh_hourly(predicted_daily / DAILY_TO_HOURLY, measured_daily / DAILY_TO_HOURLY)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkEvaluation {
    pub link_id: String,
    pub predicted: f64,
    pub observed: f64,
    pub geh: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub per_link: Vec<LinkEvaluation>,
    /// Mean hourly-equivalent GEH over counted links.
    pub objective: f64,
    /// Share of counted links with GEH below 5.
    pub share_below_5: f64,
    pub n_measurements: usize,
}

impl EvaluationReport {
    pub fn passes_share(&self, required_share: f64) -> bool {
        self.share_below_5 >= required_share
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "counted links     {}", self.n_measurements)?;
        writeln!(f, "mean GEH (J)      {:.6}", self.objective)?;
        writeln!(f, "share GEH < 5     {:.4}", self.share_below_5)?;
        let worst = self
            .per_link
            .iter()
            .max_by(|a, b| a.geh.total_cmp(&b.geh).then(b.link_id.cmp(&a.link_id)));
        if let Some(w) = worst {
            writeln!(
                f,
                "worst link        {} (predicted {:.1}, observed {:.1}, GEH {:.3})",
                w.link_id, w.predicted, w.observed, w.geh
            )?;
        }
        Ok(())
    }
}

fn predicted_for(flows: &FlowMap, count: &TrafficCount) -> Result<f64> {
    flows.get(&count.link_id).ok_or_else(|| {
        Error::Domain(format!("count references unknown link {}", count.link_id))
    })
}

/// Compare link flows with counts; uncounted links are ignored.
pub fn evaluate(flows: &FlowMap, counts: &[TrafficCount]) -> Result<EvaluationReport> {
    if counts.is_empty() {
        return Err(Error::Domain("no traffic counts: objective is undefined".into()));
    }
    let per_link = counts
        .iter()
        .map(|c| {
            let predicted = predicted_for(flows, c)?;
            Ok(LinkEvaluation {
                link_id: c.link_id.clone(),
                predicted,
                observed: c.observed,
                geh: geh_from_daily(predicted, c.observed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_link.len();
    let objective = per_link.iter().map(|l| l.geh).sum::<f64>() / n as f64;
    let below = per_link.iter().filter(|l| l.geh < GEH_THRESHOLD).count();
    Ok(EvaluationReport {
        per_link,
        objective,
        share_below_5: below as f64 / n as f64,
        n_measurements: n,
    })
}

/// Mean GEH without building the per-link report.
pub fn mean_geh(flows: &FlowMap, counts: &[TrafficCount]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::Domain("no traffic counts: objective is undefined".into()));
    }
    let mut sum = 0.0;
    for c in counts {
        sum += geh_from_daily(predicted_for(flows, c)?, c.observed)?;
    }
    Ok(sum / counts.len() as f64)
}

/// Seeded random partition of `counts` into train and test sets, each kept
/// in input order. The train side holds `round(fraction * n)` counts.
pub fn split_counts(
    counts: &[TrafficCount],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<TrafficCount>, Vec<TrafficCount>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {fraction} is not in (0, 1)")));
    }
    let n = counts.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "splitting {n} counts at {fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = counts
        .iter()
        .zip(&in_train)
        .partition(|(_, &t)| t);
    Ok((
        train.into_iter().map(|(c, _)| c.clone()).collect(),
        test.into_iter().map(|(c, _)| c.clone()).collect(),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitExperimentResult {
    pub split_fraction: f64,
    pub seed: u64,
    pub train_geh: f64,
    pub test_geh: f64,
}
