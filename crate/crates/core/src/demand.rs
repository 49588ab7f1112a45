//! Demand strata, trip generation and doubly-constrained gravity
//! distribution.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::CostMatrix;

/// Lower clamp applied to costs before power deterrence.
pub const POWER_COST_FLOOR: f64 = 1e-6;
pub const DEFAULT_JOBS_CUTOFF: f64 = 5000.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Zone {
    pub zone_id: String,
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub anchor_node: String,
    /// Nonnegative population attributes such as `population` or `jobs`.
    pub attributes: BTreeMap<String, f64>,
}

impl Zone {
    pub fn new(zone_id: impl Into<String>, anchor_node: impl Into<String>) -> Self {
        let zone_id = zone_id.into();
        Self {
            name: zone_id.clone(),
            zone_id,
            x: 0.0,
            y: 0.0,
            anchor_node: anchor_node.into(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: f64) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }

    pub fn attribute(&self, name: &str) -> Option<f64> {
        self.attributes.get(name).copied()
    }
}

/// Zone id/anchor pairs in zone order, as expected by [`crate::network::Network::new`].
pub fn zone_anchors(zones: &[Zone]) -> Vec<(String, String)> {
    zones
        .iter()
        .map(|z| (z.zone_id.clone(), z.anchor_node.clone()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeterrenceKind {
    #[default]
    Exponential,
    Power,
}

impl fmt::Display for DeterrenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeterrenceKind::Exponential => "exponential",
            DeterrenceKind::Power => "power",
        })
    }
}

impl FromStr for DeterrenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" | "exp" => Ok(DeterrenceKind::Exponential),
            "power" | "pow" => Ok(DeterrenceKind::Power),
            other => Err(Error::Config(format!("unknown deterrence kind {other:?}"))),
        }
    }
}

/// A trip-generating pair of population attributes with its own mobility
/// and distance-deterrence weight.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandStratum {
    pub name: String,
    pub production_attr: String,
    pub attraction_attr: String,
    /// Person-trips per person per 24h.
    pub mu: f64,
    pub beta: f64,
    pub deterrence: DeterrenceKind,
    /// Persons per vehicle.
    pub occupancy: f64,
}

impl DemandStratum {
    pub fn new(
        name: impl Into<String>,
        production_attr: impl Into<String>,
        attraction_attr: impl Into<String>,
        mu: f64,
        beta: f64,
    ) -> Self {
        Self {
            name: name.into(),
            production_attr: production_attr.into(),
            attraction_attr: attraction_attr.into(),
            mu,
            beta,
            deterrence: DeterrenceKind::Exponential,
            occupancy: 1.0,
        }
    }

    pub fn with_deterrence(mut self, kind: DeterrenceKind) -> Self {
        self.deterrence = kind;
        self
    }

    fn check(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::DegenerateStratum {
                stratum: self.name.clone(),
                reason,
            })
        };
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mobility must be finite and >= 0, got {}", self.mu));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        if !(self.occupancy > 0.0 && self.occupancy.is_finite()) {
            return bad(format!("occupancy must be positive, got {}", self.occupancy));
        }
        Ok(())
    }
}

/// Vehicle trip ends per zone.
#[derive(Clone, Debug, PartialEq)]
pub struct TripEnds {
    pub origins: Vec<f64>,
    pub destinations: Vec<f64>,
}

impl TripEnds {
    pub fn total(&self) -> f64 {
        self.origins.iter().sum()
    }
}

/// Trips per 24h between ordered zone pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct OdMatrix {
    pub zone_ids: Vec<String>,
    pub trips: Array2<f64>,
}

impl OdMatrix {
    pub fn zeros(zone_ids: Vec<String>) -> Self {
        let n = zone_ids.len();
        Self {
            zone_ids,
            trips: Array2::zeros((n, n)),
        }
    }

    pub fn len(&self) -> usize {
        self.zone_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zone_ids.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.trips.sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.trips.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.trips.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// Trip-weighted mean interzonal cost, `sum T*C / sum T`.
    pub fn mean_cost(&self, costs: &CostMatrix) -> f64 {
        let total = self.total();
        if total == 0.0 {
            return 0.0;
        }
        (&self.trips * &costs.values).sum() / total
    }
}

/// Job places derived from population: `sqrt(x^2 - cutoff^2)` at or above the
/// cutoff, 1 below it. The branch at exactly the cutoff yields 0.
pub fn derive_jobs(population: f64, cutoff: f64) -> f64 {
    if population >= cutoff {
        (population * population - cutoff * cutoff).sqrt()
    } else {
        1.0
    }
}

fn attribute_column(zones: &[Zone], attr: &str, stratum: &str) -> Vec<f64> {
    let mut missing = 0usize;
    let values = zones
        .iter()
        .map(|z| {
            z.attribute(attr).unwrap_or_else(|| {
                missing += 1;
                0.0
            })
        })
        .collect();
    if missing > 0 {
        log::warn!("stratum {stratum}: attribute {attr:?} missing on {missing} zone(s), using 0");
    }
    values
}

/// Origins `mu * production / occupancy`; destinations proportional to the
/// attraction attribute and rescaled to the same total.
pub fn generate_trip_ends(zones: &[Zone], stratum: &DemandStratum) -> Result<TripEnds> {
    stratum.check()?;
    let production = attribute_column(zones, &stratum.production_attr, &stratum.name);
    let attraction = attribute_column(zones, &stratum.attraction_attr, &stratum.name);
    if let Some(v) = production.iter().chain(&attraction).find(|v| !(**v >= 0.0)) {
        return Err(Error::DegenerateStratum {
            stratum: stratum.name.clone(),
            reason: format!("negative or invalid attribute value {v}"),
        });
    }
    let prod_total: f64 = production.iter().sum();
    let attr_total: f64 = attraction.iter().sum();
    for (total, attr) in [
        (prod_total, &stratum.production_attr),
        (attr_total, &stratum.attraction_attr),
    ] {
        if total == 0.0 {
            return Err(Error::DegenerateStratum {
                stratum: stratum.name.clone(),
                reason: format!("attribute {attr:?} is zero in every zone"),
            });
        }
    }
    let origins: Vec<f64> = production
        .iter()
        .map(|p| stratum.mu * p / stratum.occupancy)
        .collect();
    let total: f64 = origins.iter().sum();
    if total == 0.0 {
        log::warn!("stratum {}: zero mobility generates no trips", stratum.name);
        return Ok(TripEnds {
            destinations: vec![0.0; origins.len()],
            origins,
        });
    }
    let scale = total / attr_total;
    let destinations = attraction.iter().map(|a| a * scale).collect();
    Ok(TripEnds {
        origins,
        destinations,
    })
}

/// Deterrence `f(c)`: `exp(beta*c)` or `c^beta`, with costs clamped to
/// [`POWER_COST_FLOOR`] for the power form.
pub fn deterrence(cost: f64, beta: f64, kind: DeterrenceKind) -> f64 {
    match kind {
        DeterrenceKind::Exponential => (beta * cost).exp(),
        DeterrenceKind::Power => cost.max(POWER_COST_FLOOR).powf(beta),
    }
}

/// Unbalanced gravity seed `O_i * D_j / f(C_ij)`, diagonal included.
pub fn seed_matrix(
    ends: &TripEnds,
    costs: &CostMatrix,
    beta: f64,
    kind: DeterrenceKind,
) -> Result<OdMatrix> {
    let n = costs.len();
    if ends.origins.len() != n || ends.destinations.len() != n {
        return Err(Error::Dimension(format!(
            "{} origins and {} destinations for a {n}-zone cost matrix",
            ends.origins.len(),
            ends.destinations.len()
        )));
    }
    let trips = Array2::from_shape_fn((n, n), |(i, j)| {
        let c = costs.get(i, j);
        // Multiply by the reciprocal form so large beta*c underflows to 0
        // instead of overflowing the divisor.
        let inv = match kind {
            DeterrenceKind::Exponential => (-beta * c).exp(),
            DeterrenceKind::Power => c.max(POWER_COST_FLOOR).powf(-beta),
        };
        ends.origins[i] * ends.destinations[j] * inv
    });
    Ok(OdMatrix {
        zone_ids: costs.zone_ids.clone(),
        trips,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FurnessOptions {
    /// Maximum relative deviation of any margin from its target.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FurnessOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

/// Balanced matrix `diag(row_factors) * seed * diag(col_factors)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Balanced {
    pub od: OdMatrix,
    pub row_factors: Vec<f64>,
    pub col_factors: Vec<f64>,
    pub iterations: usize,
    pub max_deviation: f64,
}

fn relative_deviation(sums: &[f64], targets: &[f64]) -> f64 {
    sums.iter()
        .zip(targets)
        .map(|(s, t)| {
            if *t > 0.0 {
                (s - t).abs() / t
            } else {
                s.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Alternating row/column scaling of `seed` to the origin and destination
/// margins of `ends`.
pub fn furness_balance(seed: &OdMatrix, ends: &TripEnds, opts: &FurnessOptions) -> Result<Balanced> {
    let n = seed.len();
    let s = &seed.trips;
    if s.dim() != (n, n) || ends.origins.len() != n || ends.destinations.len() != n {
        return Err(Error::Dimension(format!(
            "seed {:?} with {} origins, {} destinations",
            s.dim(),
            ends.origins.len(),
            ends.destinations.len()
        )));
    }
    if s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain("seed matrix must be finite and nonnegative".into()));
    }
    let (o, d) = (&ends.origins, &ends.destinations);
    let o_total: f64 = o.iter().sum();
    let d_total: f64 = d.iter().sum();
    if (o_total - d_total).abs() > 1e-9 * o_total.abs().max(d_total.abs()) {
        return Err(Error::Infeasible(format!(
            "origin total {o_total} differs from destination total {d_total}"
        )));
    }
    if o_total == 0.0 {
        return Ok(Balanced {
            od: OdMatrix::zeros(seed.zone_ids.clone()),
            row_factors: vec![0.0; n],
            col_factors: vec![0.0; n],
            iterations: 0,
            max_deviation: 0.0,
        });
    }
    let row_support: Vec<f64> = s.rows().into_iter().map(|r| r.sum()).collect();
    let col_support: Vec<f64> = s.columns().into_iter().map(|c| c.sum()).collect();
    for (i, (&sup, &target)) in row_support.iter().zip(o).enumerate() {
        if sup == 0.0 && target > 0.0 {
            return Err(Error::Infeasible(format!(
                "seed row {} is zero but its origin target is {target}",
                seed.zone_ids[i]
            )));
        }
    }
    for (j, (&sup, &target)) in col_support.iter().zip(d).enumerate() {
        if sup == 0.0 && target > 0.0 {
            return Err(Error::Infeasible(format!(
                "seed column {} is zero but its destination target is {target}",
                seed.zone_ids[j]
            )));
        }
    }

    let mut a = vec![1.0; n];
    let mut b = vec![1.0; n];
    let mut deviation = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        for i in 0..n {
            let r: f64 = (0..n).map(|j| s[[i, j]] * b[j]).sum();
            a[i] = if r > 0.0 { o[i] / r } else { 0.0 };
        }
        for j in 0..n {
            let c: f64 = (0..n).map(|i| a[i] * s[[i, j]]).sum();
            b[j] = if c > 0.0 { d[j] / c } else { 0.0 };
        }
        let trips = Array2::from_shape_fn((n, n), |(i, j)| a[i] * s[[i, j]] * b[j]);
        let rows: Vec<f64> = trips.rows().into_iter().map(|r| r.sum()).collect();
        let cols: Vec<f64> = trips.columns().into_iter().map(|c| c.sum()).collect();
        deviation = relative_deviation(&rows, o).max(relative_deviation(&cols, d));
        if !deviation.is_finite() {
            return Err(Error::Numerical(format!(
                "furness deviation became {deviation} at iteration {iteration}"
            )));
        }
        if deviation <= opts.tol {
            return Ok(Balanced {
                od: OdMatrix {
                    zone_ids: seed.zone_ids.clone(),
                    trips,
                },
                row_factors: a,
                col_factors: b,
                iterations: iteration,
                max_deviation: deviation,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        deviation,
    })
}

/// Generate trip ends, build the gravity seed and balance it.
pub fn distribute(zones: &[Zone], stratum: &DemandStratum, costs: &CostMatrix) -> Result<OdMatrix> {
    distribute_with(zones, stratum, costs, &FurnessOptions::default())
}

pub fn distribute_with(
    zones: &[Zone],
    stratum: &DemandStratum,
    costs: &CostMatrix,
    opts: &FurnessOptions,
) -> Result<OdMatrix> {
    let zone_order_matches = zones.len() == costs.len()
        && zones
            .iter()
            .zip(&costs.zone_ids)
            .all(|(z, id)| &z.zone_id == id);
    if !zone_order_matches {
        return Err(Error::Dimension(
            "zone list does not match the cost matrix zone order".into(),
        ));
    }
    let ends = generate_trip_ends(zones, stratum)?;
    if ends.total() == 0.0 {
        return Ok(OdMatrix::zeros(costs.zone_ids.clone()));
    }
    let seed = seed_matrix(&ends, costs, stratum.beta, stratum.deterrence)?;
    Ok(furness_balance(&seed, &ends, opts)?.od)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn costs(values: Array2<f64>) -> CostMatrix {
        let ids = (0..values.nrows()).map(|i| format!("z{i}")).collect();
        CostMatrix::new(ids, values).unwrap()
    }

    fn od(trips: Array2<f64>) -> OdMatrix {
        let ids = (0..trips.nrows()).map(|i| format!("z{i}")).collect();
        OdMatrix {
            zone_ids: ids,
            trips,
        }
    }

    fn ends(o: &[f64], d: &[f64]) -> TripEnds {
        TripEnds {
            origins: o.to_vec(),
            destinations: d.to_vec(),
        }
    }

    #[test]
    fn derive_jobs_examples() {
        assert_eq!(derive_jobs(13000.0, 5000.0), 12000.0);
        assert_eq!(derive_jobs(4000.0, 5000.0), 1.0);
        assert_eq!(derive_jobs(5000.0, 5000.0), 0.0);
    }

    #[test]
    fn trip_ends_examples() {
        let one = [Zone::new("a", "n").with_attr("population", 1000.0)];
        let s = DemandStratum::new("pp", "population", "population", 1.5, 0.1);
        let e = generate_trip_ends(&one, &s).unwrap();
        assert_eq!(e.origins, [1500.0]);
        assert_eq!(e.destinations, [1500.0]);

        let two = [
            Zone::new("a", "n").with_attr("population", 100.0),
            Zone::new("b", "m").with_attr("population", 300.0),
        ];
        let s = DemandStratum::new("pp", "population", "population", 1.0, 0.1);
        let e = generate_trip_ends(&two, &s).unwrap();
        assert_eq!(e.origins, [100.0, 300.0]);
        assert_eq!(e.destinations, [100.0, 300.0]);

        let zero = DemandStratum::new("pp", "population", "population", 0.0, 0.1);
        let e = generate_trip_ends(&two, &zero).unwrap();
        assert_eq!(e.origins, [0.0, 0.0]);
        assert_eq!(e.destinations, [0.0, 0.0]);
    }

    #[test]
    fn trip_ends_rescale_attraction_and_occupancy() {
        let zones = [
            Zone::new("a", "n")
                .with_attr("population", 100.0)
                .with_attr("jobs", 1.0),
            Zone::new("b", "m")
                .with_attr("population", 300.0)
                .with_attr("jobs", 3.0),
        ];
        let mut s = DemandStratum::new("pj", "population", "jobs", 2.0, 0.1);
        s.occupancy = 2.0;
        let e = generate_trip_ends(&zones, &s).unwrap();
        assert_eq!(e.origins, [100.0, 300.0]);
        assert_eq!(e.destinations, [100.0, 300.0]);
    }

    #[test]
    fn degenerate_attributes_are_errors() {
        let zones = [Zone::new("a", "n").with_attr("population", 0.0)];
        let s = DemandStratum::new("pp", "population", "population", 1.0, 0.1);
        assert!(matches!(
            generate_trip_ends(&zones, &s),
            Err(Error::DegenerateStratum { .. })
        ));
        let zones = [Zone::new("a", "n").with_attr("population", 10.0)];
        let s = DemandStratum::new("pj", "population", "jobs", 1.0, 0.1);
        assert!(matches!(
            generate_trip_ends(&zones, &s),
            Err(Error::DegenerateStratum { .. })
        ));
    }

    #[test]
    fn deterrence_examples() {
        let e = deterrence(10.0, 0.1, DeterrenceKind::Exponential);
        assert!((e - std::f64::consts::E).abs() < 1e-12);
        assert_eq!(deterrence(123.0, 0.0, DeterrenceKind::Exponential), 1.0);
        assert!((deterrence(3.0, 2.0, DeterrenceKind::Power) - 9.0).abs() < 1e-12);
        assert!(deterrence(0.0, 2.0, DeterrenceKind::Power) > 0.0);
    }

    #[test]
    fn seed_examples() {
        let c = costs(array![[2.0]]);
        let s = seed_matrix(&ends(&[10.0], &[10.0]), &c, 0.0, DeterrenceKind::Exponential).unwrap();
        assert_eq!(s.trips, array![[100.0]]);

        let c = costs(array![[1.0, 5.0], [5.0, 1.0]]);
        let e = ends(&[3.0, 3.0], &[3.0, 3.0]);
        let s = seed_matrix(&e, &c, 0.3, DeterrenceKind::Exponential).unwrap();
        assert_eq!(s.trips, s.trips.t());
        let flat = seed_matrix(&e, &c, 0.0, DeterrenceKind::Exponential).unwrap();
        assert_eq!(flat.trips, array![[9.0, 9.0], [9.0, 9.0]]);

        assert!(seed_matrix(&ends(&[1.0], &[1.0]), &c, 0.1, DeterrenceKind::Power).is_err());
    }

    #[test]
    fn furness_examples() {
        let opts = FurnessOptions::default();
        let seed = od(array![[1.0, 1.0], [1.0, 1.0]]);
        let out = furness_balance(&seed, &ends(&[2.0, 2.0], &[2.0, 2.0]), &opts).unwrap();
        assert_eq!(out.od.trips, array![[1.0, 1.0], [1.0, 1.0]]);

        let out = furness_balance(&seed, &ends(&[3.0, 1.0], &[2.0, 2.0]), &opts).unwrap();
        let expected = array![[1.5, 1.5], [0.5, 0.5]];
        for (a, b) in out.od.trips.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn furness_errors() {
        let opts = FurnessOptions::default();
        let seed = od(array![[0.0, 0.0], [1.0, 1.0]]);
        assert!(matches!(
            furness_balance(&seed, &ends(&[1.0, 1.0], &[1.0, 1.0]), &opts),
            Err(Error::Infeasible(_))
        ));
        let seed = od(array![[1.0, 1.0], [1.0, 1.0]]);
        assert!(matches!(
            furness_balance(&seed, &ends(&[1.0, 1.0], &[1.0, 2.0]), &opts),
            Err(Error::Infeasible(_))
        ));
        // Structural zeros make these margins unreachable.
        let seed = od(array![[1.0, 0.0], [1.0, 1.0]]);
        let tight = FurnessOptions {
            tol: 1e-12,
            max_iter: 25,
        };
        assert!(matches!(
            furness_balance(&seed, &ends(&[2.0, 0.5], &[0.5, 2.0]), &tight),
            Err(Error::NotConverged { iterations: 25, .. })
        ));
    }

    #[test]
    fn distribute_with_zero_beta_is_rank_one() {
        let zones: Vec<Zone> = [100.0, 250.0, 400.0]
            .iter()
            .enumerate()
            .map(|(i, p)| Zone::new(format!("z{i}"), "n").with_attr("population", *p))
            .collect();
        let c = costs(array![[1.0, 4.0, 9.0], [4.0, 2.0, 3.0], [9.0, 3.0, 1.5]]);
        let s = DemandStratum::new("pp", "population", "population", 1.2, 0.0);
        let t = distribute(&zones, &s, &c).unwrap();
        let ends = generate_trip_ends(&zones, &s).unwrap();
        let total = ends.total();
        for i in 0..3 {
            for j in 0..3 {
                let expected = ends.origins[i] * ends.destinations[j] / total;
                assert!((t.trips[[i, j]] - expected).abs() <= 1e-12 * expected);
            }
        }
    }

    #[test]
    fn distribute_symmetric_for_identical_zones() {
        let zones = [
            Zone::new("z0", "a").with_attr("population", 500.0),
            Zone::new("z1", "b").with_attr("population", 500.0),
        ];
        let c = costs(array![[2.0, 7.0], [7.0, 2.0]]);
        let s = DemandStratum::new("pp", "population", "population", 1.0, 0.2);
        let t = distribute(&zones, &s, &c).unwrap();
        assert!((t.trips[[0, 1]] - t.trips[[1, 0]]).abs() < 1e-9);
        assert!((t.trips[[0, 0]] - t.trips[[1, 1]]).abs() < 1e-9);
    }

    #[test]
    fn distribute_rejects_zone_mismatch() {
        let zones = [Zone::new("other", "a").with_attr("population", 5.0)];
        let c = costs(array![[1.0]]);
        let s = DemandStratum::new("pp", "population", "population", 1.0, 0.2);
        assert!(matches!(distribute(&zones, &s, &c), Err(Error::Dimension(_))));
    }
}
