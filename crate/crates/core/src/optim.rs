//! Derivative-free minimizers over box bounds: Nelder-Mead and simulated
//! annealing with a Nelder-Mead polish.
//!
//! Both record every objective evaluation so a run can be replayed or
//! plotted. Points are clipped to the bounds before evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub index: usize,
    pub point: Vec<f64>,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimOutcome {
    pub best_point: Vec<f64>,
    pub best_objective: f64,
    pub history: Vec<Evaluation>,
    pub converged: bool,
}

impl OptimOutcome {
    pub fn n_evaluations(&self) -> usize {
        self.history.len()
    }

    /// Running minimum of the objective after each evaluation.
    pub fn running_best(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.history
            .iter()
            .map(|e| {
                best = best.min(e.objective);
                best
            })
            .collect()
    }
}

pub fn clip(point: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    point
        .iter()
        .zip(bounds)
        .map(|(x, (lo, hi))| x.clamp(*lo, *hi))
        .collect()
}

/// Evaluation bookkeeping shared by both optimizers.
struct Recorder<'a, F> {
    f: &'a mut F,
    bounds: &'a [(f64, f64)],
    history: Vec<Evaluation>,
    best: Option<(Vec<f64>, f64)>,
}

impl<'a, F> Recorder<'a, F>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    fn new(f: &'a mut F, bounds: &'a [(f64, f64)]) -> Self {
        Self {
            f,
            bounds,
            history: Vec::new(),
            best: None,
        }
    }

    fn eval(&mut self, point: &[f64]) -> Result<f64> {
        let clipped = clip(point, self.bounds);
        let value = (self.f)(&clipped)?;
        // NaN never becomes the best point and ranks as worst in the simplex.
        let value = if value.is_nan() { f64::INFINITY } else { value };
        if self.best.as_ref().is_none_or(|(_, b)| value < *b) {
            self.best = Some((clipped.clone(), value));
        }
        self.history.push(Evaluation {
            index: self.history.len(),
            point: clipped,
            objective: value,
        });
        Ok(value)
    }

    fn finish(self, converged: bool) -> OptimOutcome {
        let (best_point, best_objective) = self.best.expect("at least one evaluation");
        OptimOutcome {
            best_point,
            best_objective,
            history: self.history,
            converged,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMeadOptions {
    /// Maximum coordinate distance between simplex vertices at convergence.
    pub xatol: f64,
    /// Maximum objective spread across the simplex at convergence.
    pub fatol: f64,
    pub max_evals: usize,
    /// Initial simplex step as a fraction of each bound range.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            xatol: 1e-6,
            fatol: 1e-8,
            max_evals: 2000,
            initial_step: 0.05,
        }
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn initial_simplex(x0: &[f64], bounds: &[(f64, f64)], step: f64) -> Vec<Vec<f64>> {
    let mut simplex = vec![x0.to_vec()];
    for (i, (lo, hi)) in bounds.iter().enumerate() {
        let range = hi - lo;
        let mut h = if range.is_finite() { step * range } else { 0.0 };
        if h == 0.0 {
            h = 0.05;
        }
        // Step inward when the vertex would leave the box.
        if x0[i] + h > *hi {
            h = -h;
        }
        let mut v = x0.to_vec();
        v[i] += h;
        simplex.push(v);
    }
    simplex
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t * (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Simplex search with reflection 1, expansion 2, contraction 0.5 and
/// shrink 0.5, evaluating `f` at bound-clipped vertices.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &NelderMeadOptions,
) -> Result<OptimOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    assert_eq!(x0.len(), bounds.len(), "x0 and bounds must have equal length");
    let mut rec = Recorder::new(&mut f, bounds);
    let n = x0.len();
    let mut simplex = initial_simplex(x0, bounds, opts.initial_step);
    let mut values = Vec::with_capacity(n + 1);
    for v in &simplex {
        values.push(rec.eval(v)?);
    }
    if n == 0 {
        return Ok(rec.finish(true));
    }

    let mut converged = false;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let f_spread = values[1..]
            .iter()
            .map(|v| (v - values[0]).abs())
            .fold(0.0, f64::max);
        if x_spread <= opts.xatol && f_spread <= opts.fatol {
            converged = true;
            break;
        }
        if rec.history.len() >= opts.max_evals {
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = affine(&centroid, &worst, -REFLECT);
        let f_reflected = rec.eval(&reflected)?;

        if f_reflected < values[0] {
            let expanded = affine(&centroid, &worst, -REFLECT * EXPAND);
            let f_expanded = rec.eval(&expanded)?;
            if f_expanded < f_reflected {
                simplex[n] = expanded;
                values[n] = f_expanded;
            } else {
                simplex[n] = reflected;
                values[n] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_reflected;
            continue;
        }
        let accepted = if f_reflected < values[n] {
            let outside = affine(&centroid, &reflected, CONTRACT);
            let f_outside = rec.eval(&outside)?;
            (f_outside <= f_reflected).then_some((outside, f_outside))
        } else {
            let inside = affine(&centroid, &worst, CONTRACT);
            let f_inside = rec.eval(&inside)?;
            (f_inside < values[n]).then_some((inside, f_inside))
        };
        match accepted {
            Some((point, value)) => {
                simplex[n] = point;
                values[n] = value;
            }
            None => {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = affine(&best, &simplex[i], SHRINK);
                    values[i] = rec.eval(&simplex[i])?;
                }
            }
        }
    }
    Ok(rec.finish(converged))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealingOptions {
    /// Starting temperature; estimated from probe moves when `None`.
    pub initial_temp: Option<f64>,
    /// Target acceptance rate of uphill probe moves for the estimate.
    pub initial_acceptance: f64,
    pub n_probes: usize,
    /// Geometric cooling factor applied after each sweep.
    pub cooling: f64,
    pub n_sweeps: usize,
    pub steps_per_sweep: usize,
    pub restarts: usize,
    /// Local polish from the best point found; `None` skips it.
    pub polish: Option<NelderMeadOptions>,
}

impl Default for AnnealingOptions {
    fn default() -> Self {
        Self {
            initial_temp: None,
            initial_acceptance: 0.8,
            n_probes: 20,
            cooling: 0.95,
            n_sweeps: 100,
            steps_per_sweep: 20,
            restarts: 1,
            polish: Some(NelderMeadOptions::default()),
        }
    }
}

/// Smallest proposal half-width as a fraction of the bound range.
const MIN_STEP_FRACTION: f64 = 1e-3;

fn propose(rng: &mut ChaCha8Rng, x: &[f64], bounds: &[(f64, f64)], scale: f64) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(xi, (lo, hi))| {
            let half_width = 0.5 * (hi - lo) * scale.max(MIN_STEP_FRACTION);
            (xi + half_width * rng.random_range(-1.0..=1.0)).clamp(*lo, *hi)
        })
        .collect()
}

/// Metropolis search with geometric cooling, reproducible for a given
/// seed, followed by an optional Nelder-Mead polish of the best point.
///
/// Proposals perturb every coordinate uniformly within a half-width of
/// `range/2 * T/T0`. Restarts after the first begin at uniform random
/// points inside the bounds.
pub fn simulated_annealing<F>(
    mut f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    seed: u64,
    opts: &AnnealingOptions,
) -> Result<OptimOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    assert_eq!(x0.len(), bounds.len(), "x0 and bounds must have equal length");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rec = Recorder::new(&mut f, bounds);
    let start = clip(x0, bounds);
    let f_start = rec.eval(&start)?;

    let t0 = match opts.initial_temp {
        Some(t) => t,
        None => {
            let mut uphill = Vec::new();
            for _ in 0..opts.n_probes {
                let probe = propose(&mut rng, &start, bounds, 1.0);
                let delta = rec.eval(&probe)? - f_start;
                if delta > 0.0 && delta.is_finite() {
                    uphill.push(delta);
                }
            }
            if uphill.is_empty() {
                1.0
            } else {
                let mean = uphill.iter().sum::<f64>() / uphill.len() as f64;
                -mean / opts.initial_acceptance.ln()
            }
        }
    };

    for restart in 0..opts.restarts.max(1) {
        let (mut x, mut fx) = if restart == 0 {
            (start.clone(), f_start)
        } else {
            let p: Vec<f64> = bounds
                .iter()
                .map(|(lo, hi)| rng.random_range(*lo..=*hi))
                .collect();
            let fp = rec.eval(&p)?;
            (p, fp)
        };
        let mut temp = t0;
        for _ in 0..opts.n_sweeps {
            let scale = if t0 > 0.0 { temp / t0 } else { 0.0 };
            for _ in 0..opts.steps_per_sweep {
                let y = propose(&mut rng, &x, bounds, scale);
                let fy = rec.eval(&y)?;
                let delta = fy - fx;
                let u: f64 = rng.random();
                if delta <= 0.0 || (temp > 0.0 && u < (-delta / temp).exp()) {
                    x = y;
                    fx = fy;
                }
            }
            temp *= opts.cooling;
        }
    }

    let mut converged = false;
    if let Some(polish) = &opts.polish {
        let (best, _) = rec.best.clone().expect("evaluated");
        let local = nelder_mead(|p| rec.eval(p), &best, bounds, polish)?;
        converged = local.converged;
    }
    Ok(rec.finish(converged))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum() {
        let f = |x: &[f64]| Ok((x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2));
        let out = nelder_mead(f, &[0.0, 0.0], &[(-10.0, 10.0); 2], &Default::default()).unwrap();
        assert!(out.converged);
        assert!((out.best_point[0] - 2.0).abs() < 1e-4);
        assert!((out.best_point[1] + 1.0).abs() < 1e-4);
        assert!(out.best_objective < 1e-8);
    }

    #[test]
    fn rosenbrock_minimum() {
        let f = |x: &[f64]| Ok(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2));
        let opts = NelderMeadOptions {
            xatol: 1e-8,
            fatol: 1e-12,
            max_evals: 5000,
            ..Default::default()
        };
        let out = nelder_mead(f, &[-1.2, 1.0], &[(-5.0, 5.0); 2], &opts).unwrap();
        assert!((out.best_point[0] - 1.0).abs() < 1e-3);
        assert!((out.best_point[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn bound_clipping_stops_at_the_bound() {
        // Unconstrained minimum at 3 lies outside [0, 1].
        let f = |x: &[f64]| Ok((x[0] - 3.0).powi(2));
        let out = nelder_mead(f, &[0.2], &[(0.0, 1.0)], &Default::default()).unwrap();
        assert!((out.best_point[0] - 1.0).abs() < 1e-9);
        assert!(out.history.iter().all(|e| (0.0..=1.0).contains(&e.point[0])));
    }

    #[test]
    fn max_evals_leaves_unconverged() {
        let f = |x: &[f64]| Ok(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2));
        let opts = NelderMeadOptions {
            max_evals: 10,
            ..Default::default()
        };
        let out = nelder_mead(f, &[-1.2, 1.0], &[(-5.0, 5.0); 2], &opts).unwrap();
        assert!(!out.converged);
        assert!(out.history.len() < 15);
    }

    #[test]
    fn running_best_is_monotone() {
        let f = |x: &[f64]| Ok((x[0] - 0.3).abs() + (x[1] * 3.0).sin());
        let out = simulated_annealing(f, &[0.0, 0.0], &[(-2.0, 2.0); 2], 7, &Default::default()).unwrap();
        let best = out.running_best();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*best.last().unwrap(), out.best_objective);
    }

    #[test]
    fn annealing_constant_objective() {
        let bounds = [(-1.0, 4.0), (0.0, 1.0)];
        let out = simulated_annealing(|_| Ok(3.5), &[0.0, 0.5], &bounds, 1, &Default::default()).unwrap();
        assert_eq!(out.best_objective, 3.5);
        for (x, (lo, hi)) in out.best_point.iter().zip(&bounds) {
            assert!(x >= lo && x <= hi);
        }
    }

    #[test]
    fn annealing_is_reproducible() {
        let f = |x: &[f64]| Ok((x[0] * x[0] - 1.0).powi(2) + 0.3 * x[0]);
        let run = |seed| simulated_annealing(f, &[1.0], &[(-2.0, 2.0)], seed, &Default::default()).unwrap();
        assert_eq!(run(5), run(5));
        assert_ne!(run(5).history, run(6).history);
    }

    #[test]
    fn objective_errors_propagate() {
        let f = |_: &[f64]| Err(crate::Error::Numerical("boom".into()));
        assert!(nelder_mead(f, &[0.0], &[(0.0, 1.0)], &Default::default()).is_err());
    }
}
