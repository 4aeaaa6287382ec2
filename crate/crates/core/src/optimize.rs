//! Numerical search for step distributions with small expected absorption
//! time, and side-by-side tabulation of named strategies.
//!
//! Both searches run exponentiated-gradient descent on log-weights with
//! forward finite-difference gradients of the exact objective. A step that
//! would raise the objective is retried with half the step size, so every
//! accepted iterate improves on the last one.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::chain::par_fill;
use crate::dist::{floor_log2, DistSpec, StepDistribution};
use crate::error::{Error, Result};
use crate::exact::{hitting_profile, upper_bound};
use crate::potential::{potential_lower_bound, MAIN_LEMMA_C};
use crate::scalar::{KahanSum, Scalar};

/// Largest `n` accepted by the optimizers.
pub const OPTIMIZE_N_CAP: usize = 4096;

pub const DEFAULT_ITERS: usize = 500;

const MAX_GAIN: f64 = 1e6;

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeSettings {
    pub eta0: f64,
    pub fd_step: f64,
    pub mu1_floor: f64,
    /// Stop when the relative improvement over `window` iterations drops below this.
    pub rel_tol: f64,
    pub window: usize,
    /// Halvings tried before an iteration is declared stuck.
    pub max_backtracks: u32,
    pub workers: usize,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        Self {
            eta0: 0.5,
            fd_step: 1e-4,
            mu1_floor: 1e-9,
            rel_tol: 1e-6,
            window: 50,
            max_backtracks: 30,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub n: usize,
    pub family: &'static str,
    /// Weights `mu(1..=n)` of the best distribution found.
    #[serde(serialize_with = "serialize_weights")]
    pub best_dist: StepDistribution<f64>,
    pub best_value: f64,
    pub trace: Vec<TracePoint>,
    pub baseline_values: BTreeMap<String, f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub settings: OptimizeSettings,
}

fn serialize_weights<S: serde::Serializer>(
    d: &StepDistribution<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(d.weights())
}

/// `E(T)` under a uniform start, via the fixed-start recursion alone.
pub fn expected_time(dist: &StepDistribution<f64>) -> f64 {
    if !dist.mu1_positive() {
        return f64::INFINITY;
    }
    let n = dist.n();
    let w = dist.weights();
    let mut t = vec![0.0; n + 1];
    let mut total = KahanSum::new();
    for a in 1..=n {
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for d in 1..=a {
            if w[d - 1] != 0.0 {
                acc.add(w[d - 1] * t[a - d]);
            }
        }
        t[a] = acc.value() / dist.cdf_table()[a - 1];
        total.add(t[a]);
    }
    total.value() / n as f64
}

/// A parametrized family of distributions searched over its log-weights.
trait Family {
    fn dim(&self) -> usize;
    fn build(&self, probs: &[f64]) -> Result<StepDistribution<f64>>;
    /// Index of the coordinate that feeds `mu(1)`.
    fn unit_coordinate(&self) -> usize {
        0
    }
}

struct FullSimplex {
    n: usize,
}

impl Family for FullSimplex {
    fn dim(&self) -> usize {
        self.n
    }
    fn build(&self, probs: &[f64]) -> Result<StepDistribution<f64>> {
        StepDistribution::make_custom(self.n, probs)
    }
}

/// Mass `p_i` placed on the single step `2^i`.
struct IntervalWeights {
    n: usize,
}

impl Family for IntervalWeights {
    fn dim(&self) -> usize {
        floor_log2(self.n) + 1
    }
    fn build(&self, probs: &[f64]) -> Result<StepDistribution<f64>> {
        let mut raw = vec![0.0; self.n];
        for (i, &p) in probs.iter().enumerate() {
            raw[(1usize << i) - 1] = p;
        }
        StepDistribution::make_custom(self.n, &raw)
    }
}

fn normalize(probs: &mut [f64]) {
    let total: f64 = probs.iter().copied().collect::<KahanSum<f64>>().value();
    probs.iter_mut().for_each(|p| *p /= total);
}

fn softmax(theta: &[f64]) -> Vec<f64> {
    let top = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = theta.iter().map(|t| (t - top).exp()).collect();
    normalize(&mut p);
    p
}

fn apply_floor(probs: &mut [f64], unit: usize, floor: f64) {
    if probs[unit] < floor {
        probs[unit] = floor;
        normalize(probs);
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyDomain);
    }
    if n > OPTIMIZE_N_CAP {
        return Err(Error::CapExceeded {
            n,
            cap: OPTIMIZE_N_CAP,
        });
    }
    Ok(())
}

struct SearchOutcome {
    best: Vec<f64>,
    best_value: f64,
    trace: Vec<TracePoint>,
    iterations: usize,
    converged: bool,
}

fn search<F: Family + Sync>(
    family: &F,
    start: Vec<f64>,
    iters: usize,
    settings: &OptimizeSettings,
) -> Result<SearchOutcome> {
    let objective = |probs: &[f64]| -> Result<f64> { Ok(expected_time(&family.build(probs)?)) };
    let unit = family.unit_coordinate();

    let mut probs = start;
    let mut value = objective(&probs)?;
    let mut trace = vec![TracePoint {
        iteration: 0,
        objective: value,
    }];
    let mut converged = false;
    let mut iterations = 0;
    // step multiplier carried across iterations: doubled after a first-try
    // accept, otherwise left at whatever the backtracking settled on
    let mut gain = 1.0;

    for t in 0..iters {
        // coordinates with zero mass stay at zero under multiplicative updates
        let theta: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
        let mut grad = vec![0.0; family.dim()];
        par_fill(&mut grad, settings.workers, |j| {
            let j = j as usize;
            if probs[j] == 0.0 {
                return 0.0;
            }
            let mut shifted = theta.clone();
            shifted[j] += settings.fd_step;
            let mut p = softmax(&shifted);
            apply_floor(&mut p, unit, settings.mu1_floor);
            objective(&p).map_or(f64::INFINITY, |v| (v - value) / settings.fd_step)
        });
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter(
                "objective is not finite near the iterate".into(),
            ));
        }

        let mut accepted = None;
        for k in 0..=settings.max_backtracks {
            let eta = gain * settings.eta0 / (1.0 + t as f64).sqrt();
            let stepped: Vec<f64> = theta
                .iter()
                .zip(&grad)
                .map(|(th, g)| th - eta * g)
                .collect();
            let mut p = softmax(&stepped);
            apply_floor(&mut p, unit, settings.mu1_floor);
            let v = objective(&p)?;
            if v < value {
                accepted = Some((p, v));
                if k == 0 {
                    gain = (gain * 2.0).min(MAX_GAIN);
                }
                break;
            }
            gain *= 0.5;
        }
        iterations = t + 1;
        let Some((p, v)) = accepted else {
            converged = true;
            break;
        };
        probs = p;
        value = v;
        trace.push(TracePoint {
            iteration: iterations,
            objective: value,
        });
        if trace.len() > settings.window {
            let old = trace[trace.len() - 1 - settings.window].objective;
            if (old - value) / old.abs() < settings.rel_tol {
                converged = true;
                break;
            }
        }
    }
    Ok(SearchOutcome {
        best: probs,
        best_value: value,
        trace,
        iterations,
        converged,
    })
}

fn named_baselines(n: usize) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (name, d) in [
        ("harmonic", StepDistribution::harmonic(n)?),
        ("pow2", StepDistribution::pow2(n)?),
        ("uniform", StepDistribution::uniform(n)?),
    ] {
        out.insert(name.to_string(), expected_time(&d));
    }
    Ok(out)
}

/// Exponentiated-gradient search over all of the simplex, starting from the
/// harmonic distribution. `seed` is recorded; the search itself is deterministic.
pub fn optimize_full_simplex(n: usize, iters: usize, seed: u64) -> Result<OptimizeReport> {
    optimize_full_simplex_with(n, iters, seed, &OptimizeSettings::default())
}

pub fn optimize_full_simplex_with(
    n: usize,
    iters: usize,
    seed: u64,
    settings: &OptimizeSettings,
) -> Result<OptimizeReport> {
    check_n(n)?;
    let family = FullSimplex { n };
    let start = StepDistribution::<f64>::harmonic(n)?.weights().to_vec();
    let outcome = search(&family, start, iters, settings)?;
    Ok(OptimizeReport {
        n,
        family: "full_simplex",
        best_dist: family.build(&outcome.best)?,
        best_value: outcome.best_value,
        trace: outcome.trace,
        baseline_values: named_baselines(n)?,
        iterations: outcome.iterations,
        converged: outcome.converged,
        seed,
        settings: settings.clone(),
    })
}

/// Search over the masses `p_0..=p_L` placed on the steps `2^i`, starting
/// from (and reporting as `equal_mass`) the point `p_i = 1/L` for `i < L`.
pub fn optimize_interval_weights(n: usize, iters: usize, seed: u64) -> Result<OptimizeReport> {
    optimize_interval_weights_with(n, iters, seed, &OptimizeSettings::default())
}

pub fn optimize_interval_weights_with(
    n: usize,
    iters: usize,
    seed: u64,
    settings: &OptimizeSettings,
) -> Result<OptimizeReport> {
    check_n(n)?;
    let family = IntervalWeights { n };
    let levels = floor_log2(n);
    let start: Vec<f64> = if levels == 0 {
        vec![1.0]
    } else {
        (0..=levels)
            .map(|i| if i < levels { 1.0 / levels as f64 } else { 0.0 })
            .collect()
    };
    let outcome = search(&family, start.clone(), iters, settings)?;
    let mut baselines = named_baselines(n)?;
    baselines.insert("equal_mass".into(), expected_time(&family.build(&start)?));
    Ok(OptimizeReport {
        n,
        family: "interval_weights",
        best_dist: family.build(&outcome.best)?,
        best_value: outcome.best_value,
        trace: outcome.trace,
        baseline_values: baselines,
        iterations: outcome.iterations,
        converged: outcome.converged,
        seed,
        settings: settings.clone(),
    })
}

/// One strategy's exact value beside its two bounds.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyRow<T> {
    pub name: String,
    pub n: usize,
    pub e_value: T,
    pub upper_bound: T,
    pub lower_bound: T,
}

impl<T: Scalar> StrategyRow<T> {
    /// `lower_bound <= e_value <= upper_bound`, an infinite upper bound counting as satisfied.
    pub fn sandwich_holds(&self) -> bool {
        let upper_ok = !self.upper_bound.is_finite() || self.e_value <= self.upper_bound;
        self.lower_bound <= self.e_value && upper_ok
    }
}

/// Exact `E(T)`, upper bound and `Phi(n)/7` for each named strategy.
pub fn compare_strategies<T: Scalar>(n: usize, names: &[&str]) -> Result<Vec<StrategyRow<T>>> {
    names
        .iter()
        .map(|name| {
            let spec = DistSpec::parse(name)?;
            let dist = spec.build::<T>(Some(n))?;
            strategy_row(name, &dist)
        })
        .collect()
}

pub fn strategy_row<T: Scalar>(name: &str, dist: &StepDistribution<T>) -> Result<StrategyRow<T>> {
    let profile = hitting_profile(dist)?;
    let lower_bound = if dist.mu1_positive() {
        potential_lower_bound(dist, MAIN_LEMMA_C, false)?
    } else {
        T::infinity()
    };
    Ok(StrategyRow {
        name: name.to_string(),
        n: dist.n(),
        e_value: profile.e_value,
        upper_bound: upper_bound(dist),
        lower_bound,
    })
}
