use std::path::{Path, PathBuf};

use blindsearch::chain::{default_max_steps, estimate_expectation};
use blindsearch::continuous::precision_scaling_with;
use blindsearch::exact::{hitting_profile_capped, upper_bound, DEFAULT_N_CAP};
use blindsearch::optimize::{
    optimize_full_simplex_with, optimize_interval_weights_with, OptimizeSettings,
};
use blindsearch::potential::{drop_report_for, potential_profile, MAIN_LEMMA_C};
use blindsearch::{DistSpec, Error, ExtF64, Process, Result, Scalar, StepDistribution};
use serde::Serialize;

use crate::{Common, Format, Mode, Precision, ProcessArg};

pub struct Output {
    pub primary: Vec<u8>,
    pub side_files: Vec<(PathBuf, Vec<u8>)>,
}

impl From<Vec<u8>> for Output {
    fn from(primary: Vec<u8>) -> Self {
        Output {
            primary,
            side_files: Vec::new(),
        }
    }
}

pub const SANDWICH_VERDICT: &str = "lb ≤ E ≤ ub";

macro_rules! with_scalar {
    ($precision:expr, $f:ident($($arg:expr),*)) => {
        match $precision {
            Precision::F32 => $f::<f32>($($arg),*),
            Precision::F64 => $f::<f64>($($arg),*),
            Precision::Ext => $f::<ExtF64>($($arg),*),
        }
    };
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(e.into()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn json_bytes<V: Serialize + ?Sized>(value: &V) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn render<V: Serialize + ?Sized, R: Serialize>(
    format: Format,
    json: &V,
    rows: impl IntoIterator<Item = R>,
) -> Result<Vec<u8>> {
    match format {
        Format::Json => json_bytes(json),
        Format::Csv => csv_bytes(rows),
    }
}

fn build<T: Scalar>(c: &Common) -> Result<StepDistribution<T>> {
    DistSpec::parse(&c.dist)?.build(c.n)
}

fn cap(c: &Common) -> usize {
    c.n_cap_override.unwrap_or(DEFAULT_N_CAP)
}

fn check_cap(c: &Common, n: usize) -> Result<()> {
    let cap = cap(c);
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    Ok(())
}

fn dist_file_bytes<T: Scalar>(dist: &StepDistribution<T>) -> Result<Vec<u8>> {
    json_bytes(&dist.to_file())
}

pub fn exact(c: &Common, emit: Option<&Path>) -> Result<Output> {
    with_scalar!(c.precision, exact_as(c, emit))
}

#[derive(Serialize)]
struct ExactRow<T> {
    a: usize,
    t: T,
    a_uniform: T,
}

fn exact_as<T: Scalar>(c: &Common, emit: Option<&Path>) -> Result<Output> {
    let dist = build::<T>(c)?;
    let profile = hitting_profile_capped(&dist, cap(c))?;
    let rows = (0..=profile.n).map(|a| ExactRow {
        a,
        t: profile.t[a],
        a_uniform: profile.a_uniform[a],
    });
    let mut out = Output::from(render(c.format, &profile, rows)?);
    if let Some(path) = emit {
        out.side_files
            .push((path.to_path_buf(), dist_file_bytes(&dist)?));
    }
    Ok(out)
}

pub fn simulate(c: &Common, which: ProcessArg) -> Result<Output> {
    with_scalar!(c.precision, simulate_as(c, which))
}

#[derive(Serialize)]
struct SimRow {
    process: String,
    n: usize,
    runs: u64,
    mean: f64,
    std_error: f64,
    censored: u64,
    master_seed: u64,
}

fn simulate_as<T: Scalar>(c: &Common, which: ProcessArg) -> Result<Output> {
    let dist = build::<T>(c)?.with_alias_sampler();
    let max_steps = c.max_steps.unwrap_or_else(|| default_max_steps(dist.n()));
    let processes: &[Process] = match which {
        ProcessArg::R => &[Process::R],
        ProcessArg::S => &[Process::S],
        ProcessArg::Both => &[Process::R, Process::S],
    };
    let summaries = processes
        .iter()
        .map(|&p| estimate_expectation(&dist, p, c.runs, c.seed, c.workers, max_steps))
        .collect::<Result<Vec<_>>>()?;
    let rows = summaries.iter().map(|s| SimRow {
        process: s.process.to_string(),
        n: s.n,
        runs: s.runs,
        mean: s.mean,
        std_error: s.std_error,
        censored: s.censored,
        master_seed: s.master_seed,
    });
    let bytes = match summaries.as_slice() {
        [single] => render(c.format, single, rows)?,
        all => render(c.format, all, rows)?,
    };
    Ok(bytes.into())
}

pub fn potential(c: &Common) -> Result<Output> {
    with_scalar!(c.precision, potential_as(c))
}

#[derive(Serialize)]
struct DropRow<T> {
    s: usize,
    drop: T,
    delta0: T,
    delta_mid: T,
}

#[derive(Serialize)]
struct PotentialJson<'a, T> {
    n: usize,
    phi0: T,
    decay: f64,
    max_drop: T,
    max_delta0: T,
    max_delta_mid: T,
    within_proven_bounds: bool,
    per_state_drop: &'a [T],
    per_state_delta0: &'a [T],
    per_state_delta_mid: &'a [T],
}

fn potential_as<T: Scalar>(c: &Common) -> Result<Output> {
    let dist = build::<T>(c)?;
    check_cap(c, dist.n())?;
    let profile = potential_profile(&dist)?;
    let report = drop_report_for(&dist, &profile)?;
    let json = PotentialJson {
        n: dist.n(),
        phi0: profile.phi0,
        decay: profile.decay,
        max_drop: report.max_drop,
        max_delta0: report.max_delta0(),
        max_delta_mid: report.max_delta_mid(),
        within_proven_bounds: report.within_proven_bounds(),
        per_state_drop: &report.per_state_drop,
        per_state_delta0: &report.per_state_delta0,
        per_state_delta_mid: &report.per_state_delta_mid,
    };
    let rows = report.rows().map(|(s, drop, delta0, delta_mid)| DropRow {
        s,
        drop,
        delta0,
        delta_mid,
    });
    Ok(render(c.format, &json, rows)?.into())
}

#[derive(Serialize)]
struct BoundsRow<T> {
    n: usize,
    dist: String,
    lb: T,
    e_value: T,
    ub: T,
    verdict: &'static str,
}

/// The bounds row together with `Phi_0`.
fn bounds_row<T: Scalar>(
    c: &Common,
    spec: &DistSpec,
    n: Option<usize>,
) -> Result<(BoundsRow<T>, T)> {
    let dist: StepDistribution<T> = spec.build(n)?;
    let e_value = hitting_profile_capped(&dist, cap(c))?.e_value;
    let profile = potential_profile(&dist)?;
    let lb = profile.phi0 / T::of(MAIN_LEMMA_C);
    let ub = upper_bound(&dist);
    let holds = lb <= e_value && (e_value <= ub || !ub.is_finite());
    let row = BoundsRow {
        n: dist.n(),
        dist: spec.label(),
        lb,
        e_value,
        ub,
        verdict: if holds { SANDWICH_VERDICT } else { "violated" },
    };
    Ok((row, profile.phi0))
}

pub fn bounds(c: &Common) -> Result<Output> {
    with_scalar!(c.precision, bounds_as(c))
}

fn bounds_as<T: Scalar>(c: &Common) -> Result<Output> {
    let spec = DistSpec::parse(&c.dist)?;
    let (row, _) = bounds_row::<T>(c, &spec, c.n)?;
    Ok(render(c.format, &row, [&row])?.into())
}

#[derive(Serialize)]
struct ScalingRow<T> {
    n: usize,
    e_value: T,
    phi0: T,
    ub: T,
    lb: T,
    e_over_log2n_sq: f64,
}

pub fn scaling(c: &Common, lo: u32, hi: u32) -> Result<Output> {
    if lo > hi || hi >= usize::BITS - 1 {
        return Err(Error::InvalidParameter(format!(
            "need n-min-exp <= n-max-exp < 63, got {lo}..{hi}"
        )));
    }
    with_scalar!(c.precision, scaling_as(c, lo, hi))
}

fn scaling_as<T: Scalar>(c: &Common, lo: u32, hi: u32) -> Result<Output> {
    let spec = DistSpec::parse(&c.dist)?;
    let mut rows = Vec::new();
    for k in lo..=hi {
        let n = 1usize << k;
        let (row, phi0) = bounds_row::<T>(c, &spec, Some(n))?;
        let log2n = k as f64;
        rows.push(ScalingRow {
            n,
            e_value: row.e_value,
            phi0,
            ub: row.ub,
            lb: row.lb,
            e_over_log2n_sq: if k == 0 {
                f64::NAN
            } else {
                row.e_value.lossy() / (log2n * log2n)
            },
        });
    }
    Ok(render(c.format, &rows, &rows)?.into())
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    objective: f64,
}

pub fn optimize(c: &Common, mode: Mode, iters: usize, emit: Option<&Path>) -> Result<Output> {
    let n =
        c.n.ok_or_else(|| Error::InvalidParameter("--n is required".into()))?;
    let settings = OptimizeSettings {
        workers: c.workers,
        ..OptimizeSettings::default()
    };
    let report = match mode {
        Mode::Full => optimize_full_simplex_with(n, iters, c.seed, &settings)?,
        Mode::Interval => optimize_interval_weights_with(n, iters, c.seed, &settings)?,
    };
    let rows = report.trace.iter().map(|t| TraceRow {
        iteration: t.iteration,
        objective: t.objective,
    });
    let mut out = Output::from(render(c.format, &report, rows)?);
    if let Some(path) = emit {
        out.side_files
            .push((path.to_path_buf(), dist_file_bytes(&report.best_dist)?));
    }
    Ok(out)
}

#[derive(Serialize)]
struct ContinuousRow {
    epsilon: f64,
    p: f64,
    mean_steps: f64,
    std_error: f64,
    halving_rate: f64,
}

pub fn continuous(c: &Common, eps: &[f64], x0: f64) -> Result<Output> {
    let eps: Vec<f64> = if eps.is_empty() {
        (5..=12).map(|k| 2f64.powi(-k)).collect()
    } else {
        eps.to_vec()
    };
    let max_steps = c
        .max_steps
        .unwrap_or(blindsearch::continuous::DEFAULT_MAX_STEPS);
    let table = precision_scaling_with(&eps, c.runs, c.seed, c.workers, x0, max_steps)?;
    let rows = table.rows.iter().map(|r| ContinuousRow {
        epsilon: r.epsilon,
        p: r.p,
        mean_steps: r.mean_steps,
        std_error: r.std_error,
        halving_rate: r.halving_rate,
    });
    Ok(render(c.format, &table, rows)?.into())
}
