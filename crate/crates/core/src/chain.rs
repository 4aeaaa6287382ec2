//! Transition kernels of the token process `R` and of the deferred-decision
//! process `S`, plus seeded Monte Carlo estimation of their absorption times.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::StepDistribution;
use crate::error::{Error, Result};
use crate::scalar::{KahanSum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Process {
    /// The token process: a step of size `d` is taken iff `d <= position`.
    R,
    /// Tracks only an interval `[1, s]` on which the token is uniform.
    S,
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Process::R => "R",
            Process::S => "S",
        })
    }
}

/// Outgoing probabilities of one state, sorted by target, zero entries omitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRow<T> {
    pub from_state: usize,
    pub entries: Vec<(usize, T)>,
}

impl<T: Scalar> TransitionRow<T> {
    pub fn total(&self) -> T {
        self.entries
            .iter()
            .map(|e| e.1)
            .collect::<KahanSum<T>>()
            .value()
    }

    pub fn prob(&self, to: usize) -> T {
        self.entries
            .iter()
            .find(|e| e.0 == to)
            .map_or(T::zero(), |e| e.1)
    }
}

fn check_state<T: Scalar>(dist: &StepDistribution<T>, state: usize) -> Result<()> {
    if state > dist.n() {
        Err(Error::OutOfRange { state, n: dist.n() })
    } else {
        Ok(())
    }
}

fn absorbing<T: Scalar>() -> TransitionRow<T> {
    TransitionRow {
        from_state: 0,
        entries: vec![(0, T::one())],
    }
}

/// Row `a` of the token process: `a -> a-d` with `mu(d)`, stay with `1 - F(a)`.
pub fn r_transition_row<T: Scalar>(
    dist: &StepDistribution<T>,
    a: usize,
) -> Result<TransitionRow<T>> {
    check_state(dist, a)?;
    if a == 0 {
        return Ok(absorbing());
    }
    let mut entries: Vec<(usize, T)> = (1..=a)
        .rev()
        .map(|d| (a - d, dist.weight(d)))
        .filter(|e| !e.1.is_zero())
        .collect();
    let stay = T::one() - dist.cdf_at(a);
    if stay > T::zero() {
        entries.push((a, stay));
    }
    Ok(TransitionRow {
        from_state: a,
        entries,
    })
}

/// Row `s` of the deferred process: `s -> 0` with `F(s)/s`,
/// `s -> s'` with `(mu(s'+1) + mu(s-s')) s'/s`, stay with `1 - F(s)`.
pub fn s_transition_row<T: Scalar>(
    dist: &StepDistribution<T>,
    s: usize,
) -> Result<TransitionRow<T>> {
    check_state(dist, s)?;
    if s == 0 {
        return Ok(absorbing());
    }
    let inv_s = T::one() / T::of_usize(s);
    let mut entries = Vec::with_capacity(s + 1);
    let finish = dist.cdf_at(s) * inv_s;
    if !finish.is_zero() {
        entries.push((0, finish));
    }
    for sp in 1..s {
        let p = (dist.weight(sp + 1) + dist.weight(s - sp)) * T::of_usize(sp) * inv_s;
        if !p.is_zero() {
            entries.push((sp, p));
        }
    }
    let stay = T::one() - dist.cdf_at(s);
    if stay > T::zero() {
        entries.push((s, stay));
    }
    Ok(TransitionRow {
        from_state: s,
        entries,
    })
}

pub fn transition_row<T: Scalar>(
    dist: &StepDistribution<T>,
    process: Process,
    state: usize,
) -> Result<TransitionRow<T>> {
    match process {
        Process::R => r_transition_row(dist, state),
        Process::S => s_transition_row(dist, state),
    }
}

/// Expected absorption time from every state, by forward substitution on
/// the lower-triangular system `(I - P) x = 1`, `x_0 = 0`.
pub fn absorption_times_by_kernel<T: Scalar>(
    dist: &StepDistribution<T>,
    process: Process,
) -> Result<Vec<T>> {
    let n = dist.n();
    let mut x = vec![T::zero(); n + 1];
    for s in 1..=n {
        let row = transition_row(dist, process, s)?;
        let mut acc = KahanSum::new();
        acc.add(T::one());
        let mut stay = T::zero();
        for &(to, p) in &row.entries {
            if to == s {
                stay = p;
            } else {
                acc.add(p * x[to]);
            }
        }
        x[s] = acc.value() / (T::one() - stay);
    }
    Ok(x)
}

/// Result of one simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub steps: u64,
    pub absorbed: bool,
}

/// One transition from `state` (a no-op at 0).
pub fn step<T: Scalar, R: Rng + ?Sized>(
    dist: &StepDistribution<T>,
    process: Process,
    state: usize,
    rng: &mut R,
) -> usize {
    if state == 0 {
        return 0;
    }
    let d = dist.sample(rng);
    if d > state {
        return state;
    }
    match process {
        Process::R => state - d,
        Process::S => {
            // position of the token among 1..=state, one variate; ordered
            // as accept (above d), finish (at d), reject (below d)
            let k = rng.random_range(0..state);
            if k < state - d {
                state - d
            } else if k == state - d {
                0
            } else {
                d - 1
            }
        }
    }
}

/// Runs the chain from `start` until it hits 0 or `max_steps` transitions
/// have been made.
pub fn simulate_run<T: Scalar, R: Rng + ?Sized>(
    dist: &StepDistribution<T>,
    process: Process,
    start: usize,
    rng: &mut R,
    max_steps: u64,
) -> RunOutcome {
    let mut state = start.min(dist.n());
    let mut steps = 0;
    while state != 0 && steps < max_steps {
        state = step(dist, process, state, rng);
        steps += 1;
    }
    RunOutcome {
        steps,
        absorbed: state == 0,
    }
}

/// Monte Carlo estimate of the expected absorption time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub process: Process,
    pub n: usize,
    pub runs: u64,
    pub mean: f64,
    pub std_error: f64,
    pub censored: u64,
    pub master_seed: u64,
    pub max_steps: u64,
}

/// `10^6 * ceil(log2(n + 1))`.
pub fn default_max_steps(n: usize) -> u64 {
    let bits = (usize::BITS - n.leading_zeros()) as u64;
    1_000_000 * bits.max(1)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the random stream owned by run `index`.
pub fn stream_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

/// Rng for run `index`; independent of how runs are split across workers.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master_seed, index))
}

/// Fills `out[i]` with `f(i)`, spreading the indices over `workers`
/// threads in contiguous blocks.
pub(crate) fn par_fill<O, F>(out: &mut [O], workers: usize, f: F)
where
    O: Send,
    F: Fn(u64) -> O + Sync,
{
    let workers = workers.max(1);
    if workers == 1 || out.len() < 2 {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i as u64);
        }
        return;
    }
    let chunk = out.len().div_ceil(workers);
    std::thread::scope(|scope| {
        for (c, block) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                let base = c * chunk;
                for (i, slot) in block.iter_mut().enumerate() {
                    *slot = f((base + i) as u64);
                }
            });
        }
    });
}

/// Every run's outcome in run-index order. Process `R` starts uniformly on
/// `[1, n]`, process `S` at `n`.
pub fn simulate_runs<T: Scalar>(
    dist: &StepDistribution<T>,
    process: Process,
    runs: u64,
    master_seed: u64,
    workers: usize,
    max_steps: u64,
) -> Vec<RunOutcome> {
    let mut out = vec![
        RunOutcome {
            steps: 0,
            absorbed: false
        };
        runs as usize
    ];
    par_fill(&mut out, workers, |i| {
        let mut rng = stream_rng(master_seed, i);
        let start = match process {
            Process::R => rng.random_range(1..=dist.n()),
            Process::S => dist.n(),
        };
        simulate_run(dist, process, start, &mut rng, max_steps)
    });
    out
}

pub fn estimate_expectation<T: Scalar>(
    dist: &StepDistribution<T>,
    process: Process,
    runs: u64,
    master_seed: u64,
    workers: usize,
    max_steps: u64,
) -> Result<SimSummary> {
    if runs == 0 || max_steps == 0 {
        return Err(Error::InvalidParameter(
            "runs and max_steps must be at least 1".into(),
        ));
    }
    let outcomes = simulate_runs(dist, process, runs, master_seed, workers, max_steps);
    let absorbed: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.absorbed)
        .map(|o| o.steps as f64)
        .collect();
    let censored = runs - absorbed.len() as u64;
    if absorbed.is_empty() {
        return Err(Error::AllCensored { runs });
    }
    let (mean, std_error) = mean_and_std_error(&absorbed);
    Ok(SimSummary {
        process,
        n: dist.n(),
        runs,
        mean,
        std_error,
        censored,
        master_seed,
        max_steps,
    })
}

/// Sample mean and `sample_std / sqrt(len)`, summed in slice order.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let len = xs.len() as f64;
    let mean = xs.iter().copied().collect::<KahanSum<f64>>().value() / len;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<KahanSum<f64>>()
        .value();
    (mean, (ss / (len - 1.0)).sqrt() / len.sqrt())
}
