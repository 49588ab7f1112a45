//! Synthetic instances with known ground-truth weights.
//!
//! [`toy_model`] is the bundled eight-zone star-and-ring network: a 100k
//! centre and seven satellites of 20k-40k. [`regional_model`] builds a
//! larger grid network with many counted links for split experiments.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::assignment::AssignmentOptions;
use crate::demand::{DemandStratum, Zone, DEFAULT_JOBS_CUTOFF};
use crate::error::Result;
use crate::metrics::TrafficCount;
use crate::model::{DeriveRule, Model};
use crate::network::{Link, Node};

/// Ground-truth mobility used for the bundled toy counts.
pub const TOY_TRUE_MU: f64 = 0.70;
/// Ground-truth deterrence weight used for the bundled toy counts.
pub const TOY_TRUE_BETA: f64 = 0.074;
pub const TOY_INITIAL_MU: f64 = 1.5;
pub const TOY_INITIAL_BETA: f64 = 0.1;

const TOY_POPULATIONS: [f64; 7] = [25000.0, 32000.0, 20000.0, 38000.0, 27000.0, 40000.0, 30000.0];
const TOY_RADII_KM: [f64; 7] = [14.0, 18.0, 12.0, 22.0, 16.0, 20.0, 15.0];
const TOY_SPOKE_MIN: [f64; 7] = [12.0, 15.0, 10.0, 19.0, 14.0, 17.0, 13.0];
/// Ring time from satellite k to satellite k+1 (cyclic).
const TOY_RING_MIN: [f64; 7] = [14.0, 14.0, 17.0, 17.0, 16.0, 16.0, 13.0];
const TOY_SPOKE_CAPACITY: f64 = 30000.0;
const TOY_RING_CAPACITY: f64 = 15000.0;

fn two_way(links: &mut Vec<Link>, a: &str, b: &str, t0: f64, q_max: f64, length: Option<f64>) {
    for (from, to) in [(a, b), (b, a)] {
        let mut link = Link::new(format!("{from}-{to}"), from, to, t0, q_max);
        link.length = length;
        links.push(link);
    }
}

/// Zones, nodes and links of the eight-zone toy topology.
pub fn toy_parts() -> (Vec<Zone>, Vec<Node>, Vec<Link>) {
    let mut zones = vec![Zone {
        name: "Centre".into(),
        ..Zone::new("Z0", "n0").with_attr("population", 100000.0)
    }];
    let mut nodes = vec![Node::new("n0", 0.0, 0.0)];
    let mut links = Vec::new();
    for k in 0..7 {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / 7.0;
        let (x, y) = (TOY_RADII_KM[k] * angle.cos(), TOY_RADII_KM[k] * angle.sin());
        let node = format!("n{}", k + 1);
        nodes.push(Node::new(node.clone(), x, y));
        zones.push(Zone {
            name: format!("Satellite {}", k + 1),
            x,
            y,
            ..Zone::new(format!("Z{}", k + 1), node.clone()).with_attr("population", TOY_POPULATIONS[k])
        });
        two_way(&mut links, "n0", &node, TOY_SPOKE_MIN[k], TOY_SPOKE_CAPACITY, Some(TOY_RADII_KM[k]));
    }
    for k in 0..7 {
        let a = format!("n{}", k + 1);
        let b = format!("n{}", (k + 1) % 7 + 1);
        two_way(&mut links, &a, &b, TOY_RING_MIN[k], TOY_RING_CAPACITY, None);
    }
    (zones, nodes, links)
}

pub fn toy_stratum(mu: f64, beta: f64) -> DemandStratum {
    DemandStratum::new("pop-pop", "population", "population", mu, beta)
}

/// The toy model with one-off assignment, counts on every link generated at
/// `(TOY_TRUE_MU, TOY_TRUE_BETA)` with multiplicative Gaussian `noise`, and
/// the stratum initialised at `(TOY_INITIAL_MU, TOY_INITIAL_BETA)`.
pub fn toy_model(noise: f64, seed: u64) -> Result<Model> {
    let (zones, nodes, links) = toy_parts();
    let mut model = Model::new(
        zones,
        nodes,
        links,
        Vec::new(),
        vec![toy_stratum(TOY_INITIAL_MU, TOY_INITIAL_BETA)],
    )?;
    model.assignment = AssignmentOptions::one_off();
    let truth = [toy_stratum(TOY_TRUE_MU, TOY_TRUE_BETA)];
    model.counts = synthesize_counts(&model, &truth, None, noise, seed)?;
    Ok(model)
}

/// Counts produced by running `truth` through the model's assignment.
///
/// Each observed value is `flow * (1 + noise * z)` with standard normal `z`,
/// floored at zero. `links = None` counts every link in link-id order.
pub fn synthesize_counts(
    model: &Model,
    truth: &[DemandStratum],
    links: Option<&[String]>,
    noise: f64,
    seed: u64,
) -> Result<Vec<TrafficCount>> {
    let flows = model.with_strata(truth.to_vec()).assign()?.flows;
    let ids: Vec<String> = match links {
        Some(ids) => ids.to_vec(),
        None => flows.link_ids().to_vec(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    ids.into_iter()
        .map(|id| {
            let flow = flows.get(&id).ok_or_else(|| {
                crate::Error::Domain(format!("cannot synthesize a count on unknown link {id}"))
            })?;
            let z: f64 = normal.sample(&mut rng);
            Ok(TrafficCount::new(id, (flow * (1.0 + noise * z)).max(0.0)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionalConfig {
    /// Nodes per side of the square grid.
    pub grid: usize,
    pub spacing_km: f64,
    pub n_zones: usize,
    pub n_counts: usize,
    /// Median zone population.
    pub median_population: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for RegionalConfig {
    fn default() -> Self {
        Self {
            grid: 10,
            spacing_km: 4.0,
            n_zones: 40,
            n_counts: 250,
            median_population: 4000.0,
            noise: 0.1,
            seed: 0,
        }
    }
}

/// A grid network with zones at random nodes carrying `population` and
/// derived `jobs`, counted on `n_counts` random loaded links.
///
/// `truth` generates the counts; the returned model carries `initial` as
/// its strata and uses one-off assignment.
pub fn regional_model(
    cfg: &RegionalConfig,
    truth: &[DemandStratum],
    initial: &[DemandStratum],
) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let id = |r: usize, c: usize| format!("r{r:02}c{c:02}");
    let mut nodes = Vec::new();
    for r in 0..cfg.grid {
        for c in 0..cfg.grid {
            nodes.push(Node::new(id(r, c), c as f64 * cfg.spacing_km, r as f64 * cfg.spacing_km));
        }
    }
    let mut links = Vec::new();
    let mut road = |rng: &mut ChaCha8Rng, a: String, b: String| {
        let speed: f64 = rng.random_range(40.0..90.0);
        let t0 = cfg.spacing_km / speed * 60.0;
        let q_max = (speed * 400.0).round();
        two_way(&mut links, &a, &b, t0, q_max, Some(cfg.spacing_km));
    };
    for r in 0..cfg.grid {
        for c in 0..cfg.grid {
            if c + 1 < cfg.grid {
                road(&mut rng, id(r, c), id(r, c + 1));
            }
            if r + 1 < cfg.grid {
                road(&mut rng, id(r, c), id(r + 1, c));
            }
        }
    }
    let population = LogNormal::new(cfg.median_population.ln(), 1.0).expect("valid lognormal");
    let mut chosen = sample(&mut rng, nodes.len(), cfg.n_zones).into_vec();
    chosen.sort_unstable();
    let mut zones: Vec<Zone> = chosen
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let node = &nodes[n];
            let pop: f64 = population.sample(&mut rng);
            Zone {
                x: node.x,
                y: node.y,
                ..Zone::new(format!("R{k:03}"), node.node_id.clone())
                    .with_attr("population", pop.clamp(200.0, 100000.0).round())
            }
        })
        .collect();
    let rule = DeriveRule::JobsFromPopulation {
        source: "population".into(),
        target: "jobs".into(),
        cutoff: DEFAULT_JOBS_CUTOFF,
    };
    rule.apply(&mut zones);

    let mut model = Model::new(zones, nodes, links, Vec::new(), initial.to_vec())?;
    model.derive = vec![rule];
    model.assignment = AssignmentOptions::one_off();
    let flows = model.with_strata(truth.to_vec()).assign()?.flows;
    let loaded: Vec<String> = flows
        .iter()
        .filter(|(_, f)| *f > 0.0)
        .map(|(id, _)| id.to_string())
        .collect();
    let n = cfg.n_counts.min(loaded.len());
    let mut picked = sample(&mut rng, loaded.len(), n).into_vec();
    picked.sort_unstable();
    let counted: Vec<String> = picked.into_iter().map(|i| loaded[i].clone()).collect();
    model.counts = synthesize_counts(&model, truth, Some(&counted), cfg.noise, cfg.seed.wrapping_add(1))?;
    Ok(model)
}
