//! Macroscopic three-step transport modelling calibrated against traffic
//! counts.
//!
//! Zonal attributes feed trip generation, a doubly constrained gravity
//! model distributes trips, and an all-or-nothing or iterative assignment
//! loads them onto a congestible network. [`calibrate`] then searches the
//! per-stratum mobility and deterrence weights that minimise the mean GEH
//! against counted links.
//!
//! ```
//! use flowfit::synthetic::toy_model;
//! let model = toy_model(0.0, 0).unwrap();
//! let report = model.evaluate().unwrap();
//! assert!(report.objective > 0.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= 0.0)` also rejects NaN.

pub mod assignment;
pub mod calibrate;
pub mod demand;
mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod network;
pub mod optim;
pub mod scenario;
pub mod synthetic;

pub use assignment::{assign_all_or_nothing, assign_iterative, AssignmentMode, AssignmentOptions, AssignmentResult};
pub use calibrate::{calibrate, split_test, CalibrationOptions, CalibrationResult, Method, WeightVector};
pub use demand::{DemandStratum, DeterrenceKind, OdMatrix, Zone};
pub use error::{Error, Result};
pub use metrics::{evaluate, geh_from_daily, geh_hourly, EvaluationReport, TrafficCount};
pub use model::Model;
pub use network::{volume_delay, CostMatrix, Diagnostic, FlowMap, Link, Network, Node};
pub use scenario::{apply_scenario, NetworkEdit, Scenario};
