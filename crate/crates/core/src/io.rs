//! Model files and result exports.
//!
//! A model is a TOML spec plus four CSV tables. Paths in the spec are
//! relative to the spec file.
//!
//! | file   | columns |
//! |--------|---------|
//! | zones  | `zone_id,name,x,y,anchor_node,attr:<name>...` |
//! | nodes  | `node_id,x,y` |
//! | links  | `link_id,from_node,to_node,t0_min,capacity_veh24h,alpha1,alpha2[,length_km]` |
//! | counts | `link_id,observed_veh24h[,reverse_link_id]` |
//!
//! Blank `alpha1`/`alpha2` cells take the default BPR constants. A count
//! row with a `reverse_link_id` is a two-way total and is split evenly
//! between both directions.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assignment::{AssignmentMode, AssignmentOptions, AssignmentResult};
use crate::calibrate::{CalibrationOptions, CalibrationResult, Method, WeightBounds};
use crate::demand::{zone_anchors, DemandStratum, DeterrenceKind, FurnessOptions, OdMatrix, Zone, DEFAULT_JOBS_CUTOFF};
use crate::error::{Error, Result};
use crate::metrics::{EvaluationReport, SplitExperimentResult, TrafficCount};
use crate::model::{DeriveRule, Model};
use crate::network::{validate, Diagnostic, FlowMap, Link, Network, Node, DEFAULT_ALPHA1, DEFAULT_ALPHA2};
use crate::optim::{AnnealingOptions, NelderMeadOptions};
use crate::scenario::{NetworkEdit, Scenario};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub files: FileSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derive: Vec<DeriveSpec>,
    pub strata: Vec<StratumSpec>,
    #[serde(default)]
    pub assignment: AssignmentSpec,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec {
    pub zones: PathBuf,
    pub nodes: PathBuf,
    pub links: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<PathBuf>,
}

fn default_source() -> String {
    "population".into()
}

fn default_target() -> String {
    "jobs".into()
}

fn default_cutoff() -> f64 {
    DEFAULT_JOBS_CUTOFF
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeriveSpec {
    JobsFromPopulation {
        #[serde(default = "default_source")]
        source: String,
        #[serde(default = "default_target")]
        target: String,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumSpec {
    pub name: String,
    pub production: String,
    pub attraction: String,
    pub mu: f64,
    pub beta: f64,
    #[serde(default)]
    pub deterrence: DeterrenceKind,
    #[serde(default = "one")]
    pub occupancy: f64,
}

impl From<&DemandStratum> for StratumSpec {
    fn from(s: &DemandStratum) -> Self {
        Self {
            name: s.name.clone(),
            production: s.production_attr.clone(),
            attraction: s.attraction_attr.clone(),
            mu: s.mu,
            beta: s.beta,
            deterrence: s.deterrence,
            occupancy: s.occupancy,
        }
    }
}

impl From<&StratumSpec> for DemandStratum {
    fn from(s: &StratumSpec) -> Self {
        Self {
            name: s.name.clone(),
            production_attr: s.production.clone(),
            attraction_attr: s.attraction.clone(),
            mu: s.mu,
            beta: s.beta,
            deterrence: s.deterrence,
            occupancy: s.occupancy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssignmentSpec {
    pub mode: AssignmentMode,
    pub n_outer: usize,
    pub gap_tol: f64,
    pub furness_tol: f64,
    pub furness_max_iter: usize,
}

impl Default for AssignmentSpec {
    fn default() -> Self {
        Self::from(&AssignmentOptions::default())
    }
}

impl From<&AssignmentOptions> for AssignmentSpec {
    fn from(o: &AssignmentOptions) -> Self {
        Self {
            mode: o.mode,
            n_outer: o.n_outer,
            gap_tol: o.gap_tol,
            furness_tol: o.furness.tol,
            furness_max_iter: o.furness.max_iter,
        }
    }
}

impl AssignmentSpec {
    fn options(&self) -> AssignmentOptions {
        AssignmentOptions {
            mode: self.mode,
            n_outer: self.n_outer,
            gap_tol: self.gap_tol,
            furness: FurnessOptions {
                tol: self.furness_tol,
                max_iter: self.furness_max_iter,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealingSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_temp: Option<f64>,
    pub cooling: f64,
    pub sweeps: usize,
    pub steps_per_sweep: usize,
    pub restarts: usize,
    pub probes: usize,
}

impl Default for AnnealingSpec {
    fn default() -> Self {
        let d = AnnealingOptions::default();
        Self {
            initial_temp: d.initial_temp,
            cooling: d.cooling,
            sweeps: d.n_sweeps,
            steps_per_sweep: d.steps_per_sweep,
            restarts: d.restarts,
            probes: d.n_probes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSpec {
    pub method: Method,
    pub seed: u64,
    pub mu_bounds: [f64; 2],
    pub beta_bounds: [f64; 2],
    pub power_beta_bounds: [f64; 2],
    pub xatol: f64,
    pub fatol: f64,
    pub max_evals: usize,
    pub inner_mode: AssignmentMode,
    pub report_iterative: bool,
    pub annealing: AnnealingSpec,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self::from(&CalibrationOptions::default())
    }
}

impl From<&CalibrationOptions> for CalibrationSpec {
    fn from(o: &CalibrationOptions) -> Self {
        let a = &o.annealing;
        Self {
            method: o.method,
            seed: o.seed,
            mu_bounds: [o.bounds.mu.0, o.bounds.mu.1],
            beta_bounds: [o.bounds.beta_exponential.0, o.bounds.beta_exponential.1],
            power_beta_bounds: [o.bounds.beta_power.0, o.bounds.beta_power.1],
            xatol: o.nelder_mead.xatol,
            fatol: o.nelder_mead.fatol,
            max_evals: o.nelder_mead.max_evals,
            inner_mode: o.inner.mode,
            report_iterative: o.report_iterative,
            annealing: AnnealingSpec {
                initial_temp: a.initial_temp,
                cooling: a.cooling,
                sweeps: a.n_sweeps,
                steps_per_sweep: a.steps_per_sweep,
                restarts: a.restarts,
                probes: a.n_probes,
            },
        }
    }
}

impl CalibrationSpec {
    fn options(&self, assignment: &AssignmentOptions) -> CalibrationOptions {
        let nelder_mead = NelderMeadOptions {
            xatol: self.xatol,
            fatol: self.fatol,
            max_evals: self.max_evals,
            ..NelderMeadOptions::default()
        };
        let a = &self.annealing;
        CalibrationOptions {
            method: self.method,
            bounds: WeightBounds {
                mu: (self.mu_bounds[0], self.mu_bounds[1]),
                beta_exponential: (self.beta_bounds[0], self.beta_bounds[1]),
                beta_power: (self.power_beta_bounds[0], self.power_beta_bounds[1]),
            },
            seed: self.seed,
            nelder_mead,
            annealing: AnnealingOptions {
                initial_temp: a.initial_temp,
                n_probes: a.probes,
                cooling: a.cooling,
                n_sweeps: a.sweeps,
                steps_per_sweep: a.steps_per_sweep,
                restarts: a.restarts,
                polish: Some(nelder_mead),
                ..AnnealingOptions::default()
            },
            inner: AssignmentOptions {
                mode: self.inner_mode,
                ..*assignment
            },
            report_iterative: self.report_iterative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub edits: Vec<EditSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum EditSpec {
    AddLink {
        link_id: String,
        from_node: String,
        to_node: String,
        t0_min: f64,
        capacity_veh24h: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha2: Option<f64>,
    },
    RemoveLink {
        link_id: String,
    },
    ModifyLink {
        link_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t0_min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        capacity_veh24h: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha2: Option<f64>,
    },
}

impl From<&EditSpec> for NetworkEdit {
    fn from(e: &EditSpec) -> Self {
        match e {
            EditSpec::AddLink {
                link_id,
                from_node,
                to_node,
                t0_min,
                capacity_veh24h,
                alpha1,
                alpha2,
            } => NetworkEdit::AddLink(
                Link::new(link_id, from_node, to_node, *t0_min, *capacity_veh24h)
                    .with_bpr(alpha1.unwrap_or(DEFAULT_ALPHA1), alpha2.unwrap_or(DEFAULT_ALPHA2)),
            ),
            EditSpec::RemoveLink { link_id } => NetworkEdit::RemoveLink {
                link_id: link_id.clone(),
            },
            EditSpec::ModifyLink {
                link_id,
                t0_min,
                capacity_veh24h,
                alpha1,
                alpha2,
            } => NetworkEdit::ModifyLink {
                link_id: link_id.clone(),
                t0: *t0_min,
                q_max: *capacity_veh24h,
                alpha1: *alpha1,
                alpha2: *alpha2,
            },
        }
    }
}

impl From<&NetworkEdit> for EditSpec {
    fn from(e: &NetworkEdit) -> Self {
        match e {
            NetworkEdit::AddLink(l) => EditSpec::AddLink {
                link_id: l.link_id.clone(),
                from_node: l.from_node.clone(),
                to_node: l.to_node.clone(),
                t0_min: l.t0,
                capacity_veh24h: l.q_max,
                alpha1: Some(l.alpha1),
                alpha2: Some(l.alpha2),
            },
            NetworkEdit::RemoveLink { link_id } => EditSpec::RemoveLink {
                link_id: link_id.clone(),
            },
            NetworkEdit::ModifyLink {
                link_id,
                t0,
                q_max,
                alpha1,
                alpha2,
            } => EditSpec::ModifyLink {
                link_id: link_id.clone(),
                t0_min: *t0,
                capacity_veh24h: *q_max,
                alpha1: *alpha1,
                alpha2: *alpha2,
            },
        }
    }
}

fn toml_line(text: &str, err: &toml::de::Error) -> u64 {
    err.span()
        .map(|s| text[..s.start.min(text.len())].lines().count().max(1) as u64)
        .unwrap_or(0)
}

pub fn read_spec(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: toml_line(&text, &e),
        message: e.message().to_string(),
    })
}

/// A CSV file with named columns and the source line of every row.
struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => parse_err(0, format!("{other:?}")),
            })?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let columns = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.clone(), i))
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                parse_err(line, e.to_string())
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, record));
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            headers,
            rows,
        })
    }

    fn require(&self, column: &str) -> Result<usize> {
        self.columns.get(column).copied().ok_or_else(|| Error::Parse {
            path: self.path.clone(),
            line: 1,
            message: format!("missing column {column:?}"),
        })
    }

    fn err(&self, line: u64, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message,
        }
    }

    fn text<'r>(&self, line: u64, record: &'r csv::StringRecord, col: usize, name: &str) -> Result<&'r str> {
        match record.get(col) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(self.err(line, format!("empty {name}"))),
        }
    }

    fn number(&self, line: u64, record: &csv::StringRecord, col: usize, name: &str) -> Result<f64> {
        let raw = self.text(line, record, col, name)?;
        raw.parse()
            .map_err(|_| self.err(line, format!("{name} {raw:?} is not a number")))
    }

    fn optional_number(
        &self,
        line: u64,
        record: &csv::StringRecord,
        col: Option<usize>,
        name: &str,
    ) -> Result<Option<f64>> {
        match col.and_then(|c| record.get(c)) {
            None | Some("") => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| self.err(line, format!("{name} {raw:?} is not a number"))),
        }
    }
}

pub fn read_nodes(path: &Path) -> Result<Vec<Node>> {
    let t = Table::read(path)?;
    let id = t.require("node_id")?;
    let (x, y) = (t.columns.get("x").copied(), t.columns.get("y").copied());
    t.rows
        .iter()
        .map(|(line, r)| {
            Ok(Node {
                node_id: t.text(*line, r, id, "node_id")?.to_string(),
                x: t.optional_number(*line, r, x, "x")?.unwrap_or(0.0),
                y: t.optional_number(*line, r, y, "y")?.unwrap_or(0.0),
            })
        })
        .collect()
}

/// Links with the line each came from.
fn read_links_located(path: &Path) -> Result<Vec<(u64, Link)>> {
    let t = Table::read(path)?;
    let id = t.require("link_id")?;
    let from = t.require("from_node")?;
    let to = t.require("to_node")?;
    let t0 = t.require("t0_min")?;
    let cap = t.require("capacity_veh24h")?;
    let a1 = t.columns.get("alpha1").copied();
    let a2 = t.columns.get("alpha2").copied();
    let len = t.columns.get("length_km").copied();
    t.rows
        .iter()
        .map(|(line, r)| {
            let link = Link {
                link_id: t.text(*line, r, id, "link_id")?.to_string(),
                from_node: t.text(*line, r, from, "from_node")?.to_string(),
                to_node: t.text(*line, r, to, "to_node")?.to_string(),
                t0: t.number(*line, r, t0, "t0_min")?,
                q_max: t.number(*line, r, cap, "capacity_veh24h")?,
                alpha1: t.optional_number(*line, r, a1, "alpha1")?.unwrap_or(DEFAULT_ALPHA1),
                alpha2: t.optional_number(*line, r, a2, "alpha2")?.unwrap_or(DEFAULT_ALPHA2),
                length: t.optional_number(*line, r, len, "length_km")?,
            };
            Ok((*line, link))
        })
        .collect()
}

pub fn read_links(path: &Path) -> Result<Vec<Link>> {
    Ok(read_links_located(path)?.into_iter().map(|(_, l)| l).collect())
}

fn read_zones_located(path: &Path) -> Result<Vec<(u64, Zone)>> {
    let t = Table::read(path)?;
    let id = t.require("zone_id")?;
    let anchor = t.require("anchor_node")?;
    let name = t.columns.get("name").copied();
    let (x, y) = (t.columns.get("x").copied(), t.columns.get("y").copied());
    let attrs: Vec<(usize, String)> = t
        .headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("attr:").map(|a| (i, a.to_string())))
        .collect();
    t.rows
        .iter()
        .map(|(line, r)| {
            let zone_id = t.text(*line, r, id, "zone_id")?.to_string();
            let mut zone = Zone::new(zone_id, t.text(*line, r, anchor, "anchor_node")?);
            if let Some(n) = name.and_then(|c| r.get(c)).filter(|n| !n.is_empty()) {
                zone.name = n.to_string();
            }
            zone.x = t.optional_number(*line, r, x, "x")?.unwrap_or(0.0);
            zone.y = t.optional_number(*line, r, y, "y")?.unwrap_or(0.0);
            for (col, attr) in &attrs {
                let header = format!("attr:{attr}");
                if let Some(v) = t.optional_number(*line, r, Some(*col), &header)? {
                    if !(v >= 0.0) {
                        return Err(t.err(*line, format!("{header} must be nonnegative, got {v}")));
                    }
                    zone.attributes.insert(attr.clone(), v);
                }
            }
            Ok((*line, zone))
        })
        .collect()
}

pub fn read_zones(path: &Path) -> Result<Vec<Zone>> {
    Ok(read_zones_located(path)?.into_iter().map(|(_, z)| z).collect())
}

fn read_counts_located(path: &Path) -> Result<Vec<(u64, TrafficCount)>> {
    let t = Table::read(path)?;
    let id = t.require("link_id")?;
    let obs = t.require("observed_veh24h")?;
    let reverse = t.columns.get("reverse_link_id").copied();
    let mut out = Vec::new();
    for (line, r) in &t.rows {
        let link_id = t.text(*line, r, id, "link_id")?.to_string();
        let observed = t.number(*line, r, obs, "observed_veh24h")?;
        if !(observed >= 0.0) {
            return Err(t.err(*line, format!("observed_veh24h must be nonnegative, got {observed}")));
        }
        match reverse.and_then(|c| r.get(c)).filter(|v| !v.is_empty()) {
            Some(rev) => {
                out.push((*line, TrafficCount::new(link_id, observed / 2.0)));
                out.push((*line, TrafficCount::new(rev, observed / 2.0)));
            }
            None => out.push((*line, TrafficCount::new(link_id, observed))),
        }
    }
    Ok(out)
}

pub fn read_counts(path: &Path) -> Result<Vec<TrafficCount>> {
    Ok(read_counts_located(path)?.into_iter().map(|(_, c)| c).collect())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Load, derive and cross-check a model from its spec file. All data
/// problems are reported together as [`Error::Validation`].
pub fn load_model(spec_path: &Path) -> Result<Model> {
    let spec = read_spec(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let nodes_path = resolve(base, &spec.files.nodes);
    let links_path = resolve(base, &spec.files.links);
    let zones_path = resolve(base, &spec.files.zones);
    let nodes = read_nodes(&nodes_path)?;
    let links = read_links_located(&links_path)?;
    let zones = read_zones_located(&zones_path)?;
    let counts = match &spec.files.counts {
        Some(p) => read_counts_located(&resolve(base, p))?,
        None => Vec::new(),
    };
    let file_name = |p: &Path| p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let at = |file: &Path, line: u64, detail: Diagnostic| Diagnostic::AtRow {
        file: file_name(file),
        line,
        detail: Box::new(detail),
    };

    let node_ids: HashSet<&str> = nodes.iter().map(|n| n.node_id.as_str()).collect();
    let mut diags = Vec::new();
    for (line, link) in &links {
        for node in [&link.from_node, &link.to_node] {
            if !node_ids.contains(node.as_str()) {
                diags.push(at(
                    &links_path,
                    *line,
                    Diagnostic::MissingNode {
                        link: link.link_id.clone(),
                        node: node.clone(),
                    },
                ));
            }
        }
    }
    for (line, zone) in &zones {
        if !node_ids.contains(zone.anchor_node.as_str()) {
            diags.push(at(
                &zones_path,
                *line,
                Diagnostic::MissingAnchor {
                    zone: zone.zone_id.clone(),
                    node: zone.anchor_node.clone(),
                },
            ));
        }
    }
    let link_ids: HashSet<&str> = links.iter().map(|(_, l)| l.link_id.as_str()).collect();
    let mut counted = HashSet::new();
    let counts_path = spec.files.counts.as_ref().map(|p| resolve(base, p)).unwrap_or_default();
    for (line, c) in &counts {
        if !link_ids.contains(c.link_id.as_str()) {
            diags.push(at(
                &counts_path,
                *line,
                Diagnostic::UnknownCountLink {
                    link: c.link_id.clone(),
                },
            ));
        } else if !counted.insert(c.link_id.as_str()) {
            diags.push(at(
                &counts_path,
                *line,
                Diagnostic::DuplicateCount {
                    link: c.link_id.clone(),
                },
            ));
        }
    }

    let derive: Vec<DeriveRule> = spec
        .derive
        .iter()
        .map(|d| match d {
            DeriveSpec::JobsFromPopulation {
                source,
                target,
                cutoff,
            } => DeriveRule::JobsFromPopulation {
                source: source.clone(),
                target: target.clone(),
                cutoff: *cutoff,
            },
        })
        .collect();
    let mut zones: Vec<Zone> = zones.into_iter().map(|(_, z)| z).collect();
    for rule in &derive {
        rule.apply(&mut zones);
    }
    let known_attrs: BTreeSet<&str> = zones
        .iter()
        .flat_map(|z| z.attributes.keys().map(String::as_str))
        .collect();
    let strata: Vec<DemandStratum> = spec.strata.iter().map(DemandStratum::from).collect();
    for s in &strata {
        for attr in [&s.production_attr, &s.attraction_attr] {
            if !known_attrs.contains(attr.as_str()) {
                diags.push(Diagnostic::UnknownAttribute {
                    stratum: s.name.clone(),
                    attribute: attr.clone(),
                });
            }
        }
    }

    let network = Network::new(
        nodes,
        links.into_iter().map(|(_, l)| l).collect(),
        zone_anchors(&zones),
    );
    let located_refs = !diags.is_empty();
    diags.extend(validate(&network).into_iter().filter(|d| {
        // Dangling references are already reported with their rows.
        !(located_refs && matches!(d, Diagnostic::MissingNode { .. } | Diagnostic::MissingAnchor { .. }))
    }));
    if !diags.is_empty() {
        return Err(Error::Validation(diags));
    }

    let assignment = spec.assignment.options();
    let calibration = spec.calibration.options(&assignment);
    let scenarios = spec
        .scenarios
        .iter()
        .map(|s| Scenario::new(s.name.clone(), s.edits.iter().map(NetworkEdit::from).collect()))
        .collect();
    Ok(Model {
        zones,
        network,
        counts: counts.into_iter().map(|(_, c)| c).collect(),
        strata,
        derive,
        assignment,
        calibration,
        scenarios,
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish_csv(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    write_file(path, bytes)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_nodes(path: &Path, nodes: &[Node]) -> Result<()> {
    let mut w = csv_writer();
    let e = csv_err(path);
    w.write_record(["node_id", "x", "y"]).map_err(&e)?;
    for n in nodes {
        w.write_record([n.node_id.clone(), n.x.to_string(), n.y.to_string()])
            .map_err(&e)?;
    }
    finish_csv(path, w)
}

pub fn write_links(path: &Path, links: &[Link]) -> Result<()> {
    let mut w = csv_writer();
    let e = csv_err(path);
    w.write_record([
        "link_id",
        "from_node",
        "to_node",
        "t0_min",
        "capacity_veh24h",
        "alpha1",
        "alpha2",
        "length_km",
    ])
    .map_err(&e)?;
    for l in links {
        w.write_record([
            l.link_id.clone(),
            l.from_node.clone(),
            l.to_node.clone(),
            l.t0.to_string(),
            l.q_max.to_string(),
            l.alpha1.to_string(),
            l.alpha2.to_string(),
            opt(l.length),
        ])
        .map_err(&e)?;
    }
    finish_csv(path, w)
}

pub fn write_zones(path: &Path, zones: &[Zone]) -> Result<()> {
    let attrs: BTreeSet<&String> = zones.iter().flat_map(|z| z.attributes.keys()).collect();
    let mut w = csv_writer();
    let e = csv_err(path);
    let mut header: Vec<String> = ["zone_id", "name", "x", "y", "anchor_node"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(attrs.iter().map(|a| format!("attr:{a}")));
    w.write_record(&header).map_err(&e)?;
    for z in zones {
        let mut row = vec![
            z.zone_id.clone(),
            z.name.clone(),
            z.x.to_string(),
            z.y.to_string(),
            z.anchor_node.clone(),
        ];
        row.extend(attrs.iter().map(|a| opt(z.attribute(a))));
        w.write_record(&row).map_err(&e)?;
    }
    finish_csv(path, w)
}

pub fn write_counts(path: &Path, counts: &[TrafficCount]) -> Result<()> {
    let mut w = csv_writer();
    let e = csv_err(path);
    w.write_record(["link_id", "observed_veh24h"]).map_err(&e)?;
    for c in counts {
        w.write_record([c.link_id.clone(), c.observed.to_string()])
            .map_err(&e)?;
    }
    finish_csv(path, w)
}

/// The spec describing `model` with data files named as in `files`.
pub fn spec_for(model: &Model, files: FileSpec) -> ModelSpec {
    ModelSpec {
        files,
        derive: model
            .derive
            .iter()
            .map(|d| match d {
                DeriveRule::JobsFromPopulation {
                    source,
                    target,
                    cutoff,
                } => DeriveSpec::JobsFromPopulation {
                    source: source.clone(),
                    target: target.clone(),
                    cutoff: *cutoff,
                },
            })
            .collect(),
        strata: model.strata.iter().map(StratumSpec::from).collect(),
        assignment: AssignmentSpec::from(&model.assignment),
        calibration: CalibrationSpec::from(&model.calibration),
        scenarios: model
            .scenarios
            .iter()
            .map(|s| ScenarioSpec {
                name: s.name.clone(),
                edits: s.edits.iter().map(EditSpec::from).collect(),
            })
            .collect(),
    }
}

pub fn write_spec(path: &Path, spec: &ModelSpec) -> Result<()> {
    let text = toml::to_string(spec).map_err(|e| Error::Config(e.to_string()))?;
    write_file(path, text)
}

/// Write `model` as `model.toml` plus CSV tables into `dir`; returns the
/// spec path.
pub fn export_model(model: &Model, dir: &Path) -> Result<PathBuf> {
    let files = FileSpec {
        zones: "zones.csv".into(),
        nodes: "nodes.csv".into(),
        links: "links.csv".into(),
        counts: (!model.counts.is_empty()).then(|| "counts.csv".into()),
    };
    write_zones(&dir.join("zones.csv"), &model.zones)?;
    write_nodes(&dir.join("nodes.csv"), model.network.nodes())?;
    write_links(&dir.join("links.csv"), model.network.links())?;
    if !model.counts.is_empty() {
        write_counts(&dir.join("counts.csv"), &model.counts)?;
    }
    let spec_path = dir.join("model.toml");
    write_spec(&spec_path, &spec_for(model, files))?;
    Ok(spec_path)
}

/// `link_id,flow_total,flow_<stratum>...`
pub fn write_flows_csv(path: &Path, result: &AssignmentResult) -> Result<()> {
    let mut w = csv_writer();
    let e = csv_err(path);
    let mut header = vec!["link_id".to_string(), "flow_total".to_string()];
    header.extend(result.per_stratum_flows.iter().map(|(n, _)| format!("flow_{n}")));
    w.write_record(&header).map_err(&e)?;
    for (i, (id, total)) in result.flows.iter().enumerate() {
        let mut row = vec![id.to_string(), total.to_string()];
        row.extend(result.per_stratum_flows.iter().map(|(_, f)| f.values()[i].to_string()));
        w.write_record(&row).map_err(&e)?;
    }
    finish_csv(path, w)
}

/// Long format `origin,destination,stratum,trips`.
pub fn write_od_csv(path: &Path, matrices: &[(String, OdMatrix)]) -> Result<()> {
    let mut w = csv_writer();
    let e = csv_err(path);
    w.write_record(["origin", "destination", "stratum", "trips"]).map_err(&e)?;
    for (name, od) in matrices {
        for (i, o) in od.zone_ids.iter().enumerate() {
            for (j, d) in od.zone_ids.iter().enumerate() {
                w.write_record([o, d, name, &od.trips[[i, j]].to_string()])
                    .map_err(&e)?;
            }
        }
    }
    finish_csv(path, w)
}

/// Observed against predicted flow per counted link.
pub fn write_scatter_csv(path: &Path, report: &EvaluationReport) -> Result<()> {
    let mut w = csv_writer();
    let e = csv_err(path);
    w.write_record(["link_id", "observed", "predicted", "geh"]).map_err(&e)?;
    for l in &report.per_link {
        w.write_record([
            l.link_id.clone(),
            l.observed.to_string(),
            l.predicted.to_string(),
            l.geh.to_string(),
        ])
        .map_err(&e)?;
    }
    finish_csv(path, w)
}

pub fn write_report(path: &Path, report: &EvaluationReport) -> Result<()> {
    write_file(path, report.to_string())
}

/// `evaluation,objective,best_objective,<stratum>:mu,<stratum>:beta...`
pub fn write_history_csv(path: &Path, result: &CalibrationResult) -> Result<()> {
    let mut w = csv_writer();
    let e = csv_err(path);
    let mut header = vec![
        "evaluation".to_string(),
        "objective".to_string(),
        "best_objective".to_string(),
    ];
    header.extend(result.best_weights.names());
    w.write_record(&header).map_err(&e)?;
    for (h, best) in result.history.iter().zip(result.running_best()) {
        let mut row = vec![h.evaluation.to_string(), h.objective.to_string(), best.to_string()];
        row.extend(h.weights.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(&e)?;
    }
    finish_csv(path, w)
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightsFile {
    strata: Vec<StratumSpec>,
}

pub fn write_weights(path: &Path, strata: &[DemandStratum]) -> Result<()> {
    let file = WeightsFile {
        strata: strata.iter().map(StratumSpec::from).collect(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::Config(e.to_string()))?;
    write_file(path, text)
}

pub fn read_weights(path: &Path) -> Result<Vec<DemandStratum>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: WeightsFile = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: toml_line(&text, &e),
        message: e.message().to_string(),
    })?;
    Ok(file.strata.iter().map(DemandStratum::from).collect())
}

pub fn write_split_csv(path: &Path, rows: &[SplitExperimentResult]) -> Result<()> {
    let mut w = csv_writer();
    let e = csv_err(path);
    w.write_record(["fraction", "seed", "train_geh", "test_geh"]).map_err(&e)?;
    for r in rows {
        w.write_record([
            r.split_fraction.to_string(),
            r.seed.to_string(),
            r.train_geh.to_string(),
            r.test_geh.to_string(),
        ])
        .map_err(&e)?;
    }
    finish_csv(path, w)
}

/// Per-link flows of two networks; links present on one side only get 0
/// on the other.
pub fn write_compare_csv(path: &Path, base: &FlowMap, scenario: &FlowMap) -> Result<()> {
    let ids: BTreeSet<&str> = base
        .link_ids()
        .iter()
        .chain(scenario.link_ids())
        .map(String::as_str)
        .collect();
    let mut w = csv_writer();
    let e = csv_err(path);
    w.write_record(["link_id", "base_flow", "scenario_flow", "delta"]).map_err(&e)?;
    for id in ids {
        let b = base.get(id).unwrap_or(0.0);
        let s = scenario.get(id).unwrap_or(0.0);
        w.write_record([id.to_string(), b.to_string(), s.to_string(), (s - b).to_string()])
            .map_err(&e)?;
    }
    finish_csv(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        fs::write(dir.join(name), text).unwrap();
    }

    fn minimal(dir: &Path, links: &str) -> PathBuf {
        write(dir, "nodes.csv", "node_id,x,y\na,0,0\nb,1,0\n");
        write(dir, "links.csv", links);
        write(
            dir,
            "zones.csv",
            "zone_id,name,x,y,anchor_node,attr:population\nA,Alpha,0,0,a,13000\nB,Beta,1,0,b,4000\n",
        );
        write(dir, "counts.csv", "link_id,observed_veh24h,reverse_link_id\nab,1000,ba\n");
        write(
            dir,
            "model.toml",
            r#"
[files]
zones = "zones.csv"
nodes = "nodes.csv"
links = "links.csv"
counts = "counts.csv"

[[derive]]
kind = "jobs_from_population"

[[strata]]
name = "pop-jobs"
production = "population"
attraction = "jobs"
mu = 1.0
beta = 0.1
"#,
        );
        dir.join("model.toml")
    }

    #[test]
    fn loads_and_derives_jobs() {
        let dir = tempfile::tempdir().unwrap();
        let spec = minimal(
            dir.path(),
            "link_id,from_node,to_node,t0_min,capacity_veh24h,alpha1,alpha2\nab,a,b,5,1000,,\nba,b,a,5,1000,0.2,3\n",
        );
        let model = load_model(&spec).unwrap();
        assert_eq!(model.zones[0].attribute("jobs"), Some(12000.0));
        assert_eq!(model.zones[1].attribute("jobs"), Some(1.0));
        let ab = &model.network.links()[model.network.link_index("ab").unwrap()];
        assert_eq!((ab.alpha1, ab.alpha2), (DEFAULT_ALPHA1, DEFAULT_ALPHA2));
        assert_eq!(
            model.counts,
            vec![TrafficCount::new("ab", 500.0), TrafficCount::new("ba", 500.0)]
        );
        assert_eq!(model.assignment.mode, AssignmentMode::Iterative);
        assert_eq!(model.calibration.inner.mode, AssignmentMode::OneOff);
    }

    #[test]
    fn missing_node_is_reported_with_file_and_row() {
        let dir = tempfile::tempdir().unwrap();
        let spec = minimal(
            dir.path(),
            "link_id,from_node,to_node,t0_min,capacity_veh24h\nab,a,b,5,1000\nba,b,a,5,1000\nbx,b,x,5,1000\n",
        );
        let err = load_model(&spec).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let text = err.to_string();
        assert!(text.contains("links.csv:4"), "{text}");
        assert!(text.contains("missing node x"), "{text}");
    }

    #[test]
    fn malformed_number_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let spec = minimal(
            dir.path(),
            "link_id,from_node,to_node,t0_min,capacity_veh24h\nab,a,b,fast,1000\nba,b,a,5,1000\n",
        );
        match load_model(&spec) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("t0_min"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_spec_key_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "model.toml", "[files]\nzones='z'\nnodes='n'\nlinks='l'\nbogus=1\n");
        let err = load_model(&dir.path().join("model.toml")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn weights_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.toml");
        let strata = vec![
            DemandStratum::new("a", "population", "population", 0.7, 0.074),
            DemandStratum::new("b", "population", "jobs", 1.1, 0.2).with_deterrence(DeterrenceKind::Power),
        ];
        write_weights(&path, &strata).unwrap();
        assert_eq!(read_weights(&path).unwrap(), strata);
    }
}
