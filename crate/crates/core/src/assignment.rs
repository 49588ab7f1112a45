//! Loading OD matrices onto the network.
//!
//! All-or-nothing assignment puts every OD pair on its single shortest
//! path. The iterative variant cycles skim, re-distribution, assignment and
//! volume-delay updates, averaging flows with the method of successive
//! averages so trip tables respond to congestion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{distribute_with, DemandStratum, FurnessOptions, OdMatrix, Zone};
use crate::error::{Error, Result};
use crate::network::{anchor_trees, skim_from_trees, CostMatrix, FlowMap, Network, ShortestPathTree};

/// Shortest path (as link indices) for every ordered zone pair.
#[derive(Clone, Debug)]
pub struct RouteTable {
    zone_ids: Vec<String>,
    paths: Vec<Vec<Option<Vec<usize>>>>,
}

impl RouteTable {
    pub fn from_trees(network: &Network, trees: &[ShortestPathTree]) -> Result<Self> {
        let anchors = network.anchor_nodes()?;
        let paths = trees
            .iter()
            .enumerate()
            .map(|(i, tree)| {
                anchors
                    .iter()
                    .enumerate()
                    .map(|(j, &dest)| {
                        if i == j {
                            None
                        } else {
                            tree.path_links(network, dest)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            zone_ids: network.zone_ids(),
            paths,
        })
    }

    pub fn path(&self, origin: usize, destination: usize) -> Option<&[usize]> {
        self.paths[origin][destination].as_deref()
    }

    /// All-or-nothing loading of `od`; intrazonal trips stay off the network.
    pub fn load(&self, network: &Network, od: &OdMatrix) -> Result<FlowMap> {
        if od.zone_ids != self.zone_ids {
            return Err(Error::Dimension(
                "OD matrix zones do not match the network zone anchors".into(),
            ));
        }
        let n_links = network.links().len();
        let partials: Vec<Vec<f64>> = (0..self.zone_ids.len())
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let mut acc = vec![0.0; n_links];
                for j in 0..self.zone_ids.len() {
                    let trips = od.trips[[i, j]];
                    if i == j || trips == 0.0 {
                        continue;
                    }
                    let path = self.paths[i][j].as_ref().ok_or_else(|| Error::Disconnected {
                        from: self.zone_ids[i].clone(),
                        to: self.zone_ids[j].clone(),
                    })?;
                    for &l in path {
                        acc[l] += trips;
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut flows = FlowMap::zeros(network);
        for partial in &partials {
            for (f, p) in flows.values_mut().iter_mut().zip(partial) {
                *f += p;
            }
        }
        Ok(flows)
    }
}

/// Load every OD pair onto one shortest path under `link_times`.
pub fn assign_all_or_nothing(network: &Network, link_times: &[f64], od: &OdMatrix) -> Result<FlowMap> {
    let trees = anchor_trees(network, link_times)?;
    RouteTable::from_trees(network, &trees)?.load(network, od)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMode {
    /// Free-flow skim, one distribution and one all-or-nothing load.
    OneOff,
    #[default]
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssignmentOptions {
    pub mode: AssignmentMode,
    pub n_outer: usize,
    /// Relative L1 change in total link flows below which iteration stops.
    pub gap_tol: f64,
    pub furness: FurnessOptions,
}

impl Default for AssignmentOptions {
    fn default() -> Self {
        Self {
            mode: AssignmentMode::Iterative,
            n_outer: 5,
            gap_tol: 1e-3,
            furness: FurnessOptions::default(),
        }
    }
}

impl AssignmentOptions {
    pub fn one_off() -> Self {
        Self {
            mode: AssignmentMode::OneOff,
            ..Self::default()
        }
    }

    fn outer_iterations(&self) -> usize {
        match self.mode {
            AssignmentMode::OneOff => 1,
            AssignmentMode::Iterative => self.n_outer,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentResult {
    pub flows: FlowMap,
    /// Per-stratum flows in stratum order.
    pub per_stratum_flows: Vec<(String, FlowMap)>,
    /// Per-stratum OD matrices from the last distribution step.
    pub od_matrices: Vec<(String, OdMatrix)>,
    /// Skim used by the last distribution step.
    pub costs: CostMatrix,
    /// Congested link times implied by the final flows.
    pub link_times: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative L1 flow change of the last iteration; infinite after a
    /// single pass.
    pub relative_gap: f64,
}

/// Elementwise sum of the per-stratum flows.
pub fn total_link_flows(result: &AssignmentResult) -> Result<FlowMap> {
    let mut total = result.flows.clone();
    total.values_mut().fill(0.0);
    for (_, f) in &result.per_stratum_flows {
        total.add(f)?;
    }
    Ok(total)
}

fn relative_l1_change(prev: &[f64], next: &[f64]) -> f64 {
    let diff: f64 = prev.iter().zip(next).map(|(a, b)| (a - b).abs()).sum();
    let base: f64 = prev.iter().map(|v| v.abs()).sum();
    if base == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / base
    }
}

/// Iterate skim, distribution, all-or-nothing and BPR updates with MSA
/// weights `1/k`, up to `n_outer` times (once in one-off mode).
pub fn assign_iterative(
    network: &Network,
    zones: &[Zone],
    strata: &[DemandStratum],
    opts: &AssignmentOptions,
) -> Result<AssignmentResult> {
    let n_outer = opts.outer_iterations();
    if n_outer == 0 {
        return Err(Error::Config("at least one outer iteration is required".into()));
    }
    let mut times = network.free_flow_times();
    let mut averaged: Vec<FlowMap> = Vec::new();
    let mut total = FlowMap::zeros(network);
    let mut od_matrices = Vec::new();
    let mut costs = None;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=n_outer {
        iterations = k;
        let trees = anchor_trees(network, &times)?;
        let skim = skim_from_trees(network, &trees)?;
        let routes = RouteTable::from_trees(network, &trees)?;
        od_matrices.clear();
        for (s, stratum) in strata.iter().enumerate() {
            let od = distribute_with(zones, stratum, &skim, &opts.furness)?;
            let aon = routes.load(network, &od)?;
            if k == 1 {
                averaged.push(aon);
            } else {
                let step = 1.0 / k as f64;
                for (avg, new) in averaged[s].values_mut().iter_mut().zip(aon.values()) {
                    *avg += step * (new - *avg);
                }
            }
            od_matrices.push((stratum.name.clone(), od));
        }
        costs = Some(skim);

        let mut next = FlowMap::zeros(network);
        for f in &averaged {
            next.add(f)?;
        }
        if k > 1 {
            gap = relative_l1_change(total.values(), next.values());
        }
        total = next;
        times = network.link_times(&total)?;
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::Numerical(format!("non-finite link time {t}")));
        }
        if k > 1 && gap < opts.gap_tol {
            converged = true;
            break;
        }
    }

    Ok(AssignmentResult {
        flows: total,
        per_stratum_flows: strata
            .iter()
            .map(|s| s.name.clone())
            .zip(averaged)
            .collect(),
        od_matrices,
        costs: costs.expect("at least one iteration ran"),
        link_times: times,
        iterations,
        converged,
        relative_gap: gap,
    })
}
