//! In-memory transport model: zones, network, counts, strata and options.

use crate::assignment::{assign_iterative, AssignmentOptions, AssignmentResult};
use crate::calibrate::CalibrationOptions;
use crate::demand::{zone_anchors, DemandStratum, Zone};
use crate::error::Result;
use crate::metrics::{evaluate, EvaluationReport, TrafficCount};
use crate::network::{Link, Network, Node};
use crate::scenario::Scenario;

/// An attribute computed from another one when a model is loaded.
#[derive(Clone, Debug, PartialEq)]
pub enum DeriveRule {
    /// `target = derive_jobs(source, cutoff)`.
    JobsFromPopulation {
        source: String,
        target: String,
        cutoff: f64,
    },
}

impl DeriveRule {
    pub fn apply(&self, zones: &mut [Zone]) {
        match self {
            DeriveRule::JobsFromPopulation {
                source,
                target,
                cutoff,
            } => {
                for zone in zones {
                    let pop = zone.attribute(source).unwrap_or(0.0);
                    zone.attributes
                        .insert(target.clone(), crate::demand::derive_jobs(pop, *cutoff));
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub zones: Vec<Zone>,
    pub network: Network,
    pub counts: Vec<TrafficCount>,
    pub strata: Vec<DemandStratum>,
    pub derive: Vec<DeriveRule>,
    pub assignment: AssignmentOptions,
    pub calibration: CalibrationOptions,
    pub scenarios: Vec<Scenario>,
}

impl Model {
    /// Build a model with default options; the network is validated.
    pub fn new(
        zones: Vec<Zone>,
        nodes: Vec<Node>,
        links: Vec<Link>,
        counts: Vec<TrafficCount>,
        strata: Vec<DemandStratum>,
    ) -> Result<Self> {
        let network = Network::validated(nodes, links, zone_anchors(&zones))?;
        Ok(Self {
            zones,
            network,
            counts,
            strata,
            derive: Vec::new(),
            assignment: AssignmentOptions::default(),
            calibration: CalibrationOptions::default(),
            scenarios: Vec::new(),
        })
    }

    pub fn assign(&self) -> Result<AssignmentResult> {
        assign_iterative(&self.network, &self.zones, &self.strata, &self.assignment)
    }

    pub fn assign_with(&self, opts: &AssignmentOptions) -> Result<AssignmentResult> {
        assign_iterative(&self.network, &self.zones, &self.strata, opts)
    }

    pub fn evaluate(&self) -> Result<EvaluationReport> {
        evaluate(&self.assign()?.flows, &self.counts)
    }

    pub fn with_strata(&self, strata: Vec<DemandStratum>) -> Self {
        Self {
            strata,
            ..self.clone()
        }
    }

    pub fn with_counts(&self, counts: Vec<TrafficCount>) -> Self {
        Self {
            counts,
            ..self.clone()
        }
    }
}
