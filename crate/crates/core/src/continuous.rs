//! Scale-invariant blind search on `[0, 1]`.
//!
//! Perturbation sizes follow the density `1/(p t)` on `[eps, 1]` with
//! precision `p = ln(1/eps)`. The objective is the distance to a fixed
//! optimum `x0`, so a candidate `x +/- d` (sign chosen uniformly) is accepted
//! iff it stays in `[0, 1]` and moves closer. A run succeeds once it is
//! within `2 eps` of `x0`.

use rand::Rng;
use serde::Serialize;

use crate::chain::{mean_and_std_error, par_fill, stream_rng, stream_seed};
use crate::error::{Error, Result};

pub const DEFAULT_OPTIMUM: f64 = 0.3;

pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuousConfig {
    pub epsilon: f64,
    pub precision: f64,
    pub x0: f64,
    pub max_steps: u64,
}

impl ContinuousConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        let precision = (1.0 / epsilon).ln();
        Ok(Self {
            epsilon,
            precision,
            x0: DEFAULT_OPTIMUM,
            max_steps: DEFAULT_MAX_STEPS,
        })
    }

    pub fn with_optimum(mut self, x0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x0) {
            return Err(Error::InvalidParameter(format!(
                "x0 must lie in [0, 1], got {x0}"
            )));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }
}

/// `d = exp(-p u)` for a uniform `u`; `u = 0` gives 1 and `u = 1` gives `eps`.
pub fn scale_invariant_from_uniform(precision: f64, u: f64) -> f64 {
    (-precision * u).exp()
}

pub fn sample_scale_invariant<R: Rng + ?Sized>(precision: f64, rng: &mut R) -> f64 {
    scale_invariant_from_uniform(precision, rng.random::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ContinuousRunStats {
    /// First step at which the distance to `x0` fell below `2 eps`.
    pub steps_to_success: u64,
    /// Steps whose outcome at least halved the distance.
    pub halving_events: u64,
    /// Steps taken; all of them started at distance `>= 2 eps`.
    pub step_count_total: u64,
    pub succeeded: bool,
}

/// One search from a uniform start, until success or `max_steps`.
pub fn simulate_continuous<R: Rng + ?Sized>(
    cfg: &ContinuousConfig,
    rng: &mut R,
) -> ContinuousRunStats {
    let target = 2.0 * cfg.epsilon;
    let mut x: f64 = rng.random();
    let mut gap = (x - cfg.x0).abs();
    let mut stats = ContinuousRunStats {
        steps_to_success: 0,
        halving_events: 0,
        step_count_total: 0,
        succeeded: gap < target,
    };
    while !stats.succeeded && stats.step_count_total < cfg.max_steps {
        let d = sample_scale_invariant(cfg.precision, rng);
        let candidate = if rng.random::<bool>() { x + d } else { x - d };
        stats.step_count_total += 1;
        if !(0.0..=1.0).contains(&candidate) {
            continue;
        }
        let new_gap = (candidate - cfg.x0).abs();
        if new_gap >= gap {
            continue;
        }
        if new_gap <= gap / 2.0 {
            stats.halving_events += 1;
        }
        x = candidate;
        gap = new_gap;
        if gap < target {
            stats.succeeded = true;
            stats.steps_to_success = stats.step_count_total;
        }
    }
    stats
}

/// Runs `runs` independent searches, run `i` on stream `(seed, i)`.
pub fn simulate_many(
    cfg: &ContinuousConfig,
    runs: u64,
    seed: u64,
    workers: usize,
) -> Vec<ContinuousRunStats> {
    let empty = ContinuousRunStats {
        steps_to_success: 0,
        halving_events: 0,
        step_count_total: 0,
        succeeded: false,
    };
    let mut out = vec![empty; runs as usize];
    par_fill(&mut out, workers, |i| {
        let mut rng = stream_rng(seed, i);
        simulate_continuous(cfg, &mut rng)
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub p: f64,
    pub mean_steps: f64,
    pub std_error: f64,
    /// Halving events per step, pooled over all runs.
    pub halving_rate: f64,
    pub halving_rate_se: f64,
    pub censored: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Least-squares `c` in `mean_steps ~ c ln(1/eps) log2(1/eps)`.
    pub fit_coefficient: f64,
    /// `||mean - fit|| / ||mean||`.
    pub fit_residual: f64,
}

pub fn summarize(cfg: &ContinuousConfig, runs: &[ContinuousRunStats]) -> ScalingRow {
    let steps: Vec<f64> = runs
        .iter()
        .filter(|r| r.succeeded)
        .map(|r| r.steps_to_success as f64)
        .collect();
    let (mean_steps, std_error) = if steps.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        mean_and_std_error(&steps)
    };
    let total: u64 = runs.iter().map(|r| r.step_count_total).sum();
    let halvings: u64 = runs.iter().map(|r| r.halving_events).sum();
    let halving_rate = halvings as f64 / total.max(1) as f64;
    ScalingRow {
        epsilon: cfg.epsilon,
        p: cfg.precision,
        mean_steps,
        std_error,
        halving_rate,
        halving_rate_se: (halving_rate * (1.0 - halving_rate) / total.max(1) as f64).sqrt(),
        censored: runs.iter().filter(|r| !r.succeeded).count() as u64,
    }
}

/// One row per `eps`, with the `ln(1/eps) log2(1/eps)` fit. Row `k` uses
/// master seed `stream_seed(seed, k)`.
pub fn precision_scaling(
    eps_list: &[f64],
    runs: u64,
    seed: u64,
    workers: usize,
) -> Result<ScalingTable> {
    precision_scaling_with(
        eps_list,
        runs,
        seed,
        workers,
        DEFAULT_OPTIMUM,
        DEFAULT_MAX_STEPS,
    )
}

pub fn precision_scaling_with(
    eps_list: &[f64],
    runs: u64,
    seed: u64,
    workers: usize,
    x0: f64,
    max_steps: u64,
) -> Result<ScalingTable> {
    if runs == 0 || max_steps == 0 {
        return Err(Error::InvalidParameter(
            "runs and max_steps must be at least 1".into(),
        ));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for (k, &eps) in eps_list.iter().enumerate() {
        if !(eps > 0.0 && eps < 0.25) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1/4), got {eps}"
            )));
        }
        let cfg = ContinuousConfig::new(eps)?
            .with_optimum(x0)?
            .with_max_steps(max_steps);
        let stats = simulate_many(&cfg, runs, stream_seed(seed, k as u64), workers);
        rows.push(summarize(&cfg, &stats));
    }
    let xs: Vec<f64> = rows
        .iter()
        .map(|r| r.p * r.p / std::f64::consts::LN_2)
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_steps).collect();
    let (fit_coefficient, fit_residual) = fit_through_origin(&xs, &ys);
    Ok(ScalingTable {
        rows,
        fit_coefficient,
        fit_residual,
    })
}

/// `c = <x, y> / <x, x>` and the relative residual `||y - c x|| / ||y||`.
pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let xy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let xx: f64 = xs.iter().map(|x| x * x).sum();
    let c = xy / xx;
    let rr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - c * x).powi(2)).sum();
    let yy: f64 = ys.iter().map(|y| y * y).sum();
    (c, (rr / yy).sqrt())
}
