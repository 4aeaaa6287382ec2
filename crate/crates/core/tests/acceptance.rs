//! End-to-end acceptance checks. Runs without the libtest harness so each
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any FAIL.

mod common;

use std::f64::consts::LN_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use blindsearch::chain::{estimate_expectation, stream_rng};
use blindsearch::continuous::{
    precision_scaling, sample_scale_invariant, scale_invariant_from_uniform, simulate_many,
    summarize,
};
use blindsearch::exact::{closed_form_oracle, deferred_expectation, hitting_profile, upper_bound};
use blindsearch::optimize::{optimize_full_simplex_with, OptimizeSettings, DEFAULT_ITERS};
use blindsearch::potential::{
    drop_report_for, potential_profile, DELTA0_BOUND, DELTA_MID_BOUND, MAIN_LEMMA_C,
};
use blindsearch::{ContinuousConfig, Dist, Error, ExtF64, Process, Scalar, StepDistribution};
use common::{random_dist, rel_gap, rng};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn lemma2_equivalence() -> Verdict {
    let mut r = rng(1);
    let mut worst_ab = 0.0f64;
    let mut worst_route = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(1..=64);
        let d = random_dist(&mut r, n);
        let p = hitting_profile(&d).unwrap();
        let b = deferred_expectation(&d).unwrap();
        for s in 0..=n {
            worst_ab = worst_ab.max(rel_gap(p.a_uniform[s], b.b[s]));
        }
        let mut prefix = 0.0;
        for s in 1..=n {
            prefix += p.t[s];
            worst_route = worst_route.max(rel_gap(prefix / s as f64, p.a_uniform[s]));
        }
    }
    verdict(
        worst_ab <= 1e-9 && worst_route <= 1e-9,
        format!("max |A-B| rel {worst_ab:.1e}, max |A-avg T| rel {worst_route:.1e}"),
    )
}

fn oracle_agreement() -> Verdict {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let n = r.random_range(1..=14);
        let d = random_dist(&mut r, n);
        let e = hitting_profile(&d).unwrap().e_value;
        worst = worst.max(rel_gap(closed_form_oracle(&d).unwrap(), e));
    }
    verdict(worst <= 1e-9, format!("max rel gap {worst:.1e}"))
}

struct PoolEntry {
    label: String,
    max_drop: f64,
    delta0: f64,
    delta_mid: f64,
    sandwich: bool,
}

fn pool_entry<T: Scalar>(label: String, d: &StepDistribution<T>) -> PoolEntry {
    let profile = potential_profile(d).unwrap();
    let report = drop_report_for(d, &profile).unwrap();
    let e = hitting_profile(d).unwrap().e_value;
    let lb = profile.phi0 / T::of(MAIN_LEMMA_C);
    let ub = upper_bound(d);
    PoolEntry {
        label,
        max_drop: report.max_drop.lossy(),
        delta0: report.max_delta0().lossy(),
        delta_mid: report.max_delta_mid().lossy(),
        sandwich: e.is_finite() && lb <= e && (e <= ub || !ub.is_finite()),
    }
}

fn pool() -> Vec<PoolEntry> {
    let mut r = rng(3);
    let mut out = Vec::new();
    for i in 0..200 {
        // log-uniform sizes from 1 to 1024
        let n = 2f64.powf(r.random_range(0.0..10.0)).round() as usize;
        out.push(pool_entry(
            format!("random#{i} n={n}"),
            &random_dist(&mut r, n),
        ));
    }
    for n in [64, 256, 1024, 4096] {
        out.push(pool_entry(
            format!("harmonic n={n}"),
            &Dist::harmonic(n).unwrap(),
        ));
        out.push(pool_entry(format!("pow2 n={n}"), &Dist::pow2(n).unwrap()));
        out.push(pool_entry(
            format!("uniform n={n}"),
            &Dist::uniform(n).unwrap(),
        ));
        let b = (n as f64).powi(3);
        let adv = StepDistribution::<ExtF64>::adversarial_geometric(n, b).unwrap();
        out.push(pool_entry(format!("adversarial B=n^3 n={n}"), &adv));
    }
    out
}

fn main_lemma(pool: &[PoolEntry]) -> Verdict {
    let bad: Vec<&str> = pool
        .iter()
        .filter(|e| {
            !(e.max_drop <= MAIN_LEMMA_C
                && e.delta0 < DELTA0_BOUND
                && e.delta_mid < DELTA_MID_BOUND)
        })
        .map(|e| e.label.as_str())
        .collect();
    let top = |f: fn(&PoolEntry) -> f64| pool.iter().map(f).fold(0.0, f64::max);
    verdict(
        bad.is_empty(),
        format!(
            "{} dists, max drop {:.4}, max delta0 {:.4}, max mid {:.4}{}",
            pool.len(),
            top(|e| e.max_drop),
            top(|e| e.delta0),
            top(|e| e.delta_mid),
            if bad.is_empty() {
                String::new()
            } else {
                format!(", violations: {bad:?}")
            }
        ),
    )
}

fn sandwich(pool: &[PoolEntry]) -> Verdict {
    let bad: Vec<&str> = pool
        .iter()
        .filter(|e| !e.sandwich)
        .map(|e| e.label.as_str())
        .collect();
    verdict(
        bad.is_empty(),
        format!(
            "{} of {} within [Phi0/7, ub]{}",
            pool.len() - bad.len(),
            pool.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!(", violations: {bad:?}")
            }
        ),
    )
}

fn scaling_band() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, make) in [
        ("harmonic", Dist::harmonic as fn(usize) -> _),
        ("pow2", Dist::pow2),
    ] {
        let mut ratios = Vec::new();
        let mut phi_ratios = Vec::new();
        for k in 4..=14u32 {
            let d = make(1 << k).unwrap();
            let k2 = f64::from(k * k);
            ratios.push(hitting_profile(&d).unwrap().e_value / k2);
            phi_ratios.push(potential_profile(&d).unwrap().phi0 / k2);
        }
        let tail = &ratios[4..];
        let spread = tail.iter().copied().fold(0.0, f64::max)
            / tail.iter().copied().fold(f64::INFINITY, f64::min);
        let (lo, hi) = (
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(0.0, f64::max),
        );
        let (plo, phi) = (
            phi_ratios.iter().copied().fold(f64::INFINITY, f64::min),
            phi_ratios.iter().copied().fold(0.0, f64::max),
        );
        ok &= lo >= 0.1 && hi <= 10.0 && spread <= 2.0 && plo >= 0.1 && phi <= 1.0;
        notes.push(format!("{name}: E/k^2 in [{lo:.3}, {hi:.3}], spread {spread:.3}, Phi0/k^2 in [{plo:.3}, {phi:.3}]"));
    }
    verdict(ok, notes.join("; "))
}

fn monte_carlo() -> Verdict {
    let d = Dist::harmonic(256).unwrap().with_alias_sampler();
    let exact = hitting_profile(&d).unwrap().e_value;
    let max_steps = 1_000_000;
    let mut ok = true;
    let mut notes = Vec::new();
    for process in [Process::R, Process::S] {
        let one = estimate_expectation(&d, process, 100_000, 11, 1, max_steps).unwrap();
        let many = estimate_expectation(&d, process, 100_000, 11, 8, max_steps).unwrap();
        let same = serde_json::to_vec(&one).unwrap() == serde_json::to_vec(&many).unwrap();
        let z = (one.mean - exact) / one.std_error;
        ok &= same && z.abs() < 5.0 && one.censored == 0;
        notes.push(format!(
            "{process}: mean {:.4} z={z:+.2} identical={same}",
            one.mean
        ));
    }
    verdict(ok, format!("exact {exact:.4}; {}", notes.join("; ")))
}

fn mu1_zero() -> Verdict {
    let d = Dist::make_custom(10, &[0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
    let p = hitting_profile(&d).unwrap();
    let b = deferred_expectation(&d).unwrap();
    let engines = !p.finite && p.e_value.is_infinite() && !b.finite && b.b[10].is_infinite();
    let oracle = matches!(closed_form_oracle(&d), Err(Error::Mu1Zero));
    let potential = matches!(potential_profile(&d), Err(Error::Mu1Zero));
    let sim = match estimate_expectation(&d, Process::R, 2_000, 0, 1, 1_000) {
        Ok(s) => s.censored > 0,
        Err(Error::AllCensored { .. }) => true,
        Err(_) => false,
    };
    let pinned = Dist::make_custom(3, &[0.0, 0.0, 1.0]).unwrap();
    // from 1 or 2 nothing ever fits; only a start at 3 is absorbed
    let partial = estimate_expectation(&pinned, Process::R, 3_000, 1, 1, 1_000).unwrap();
    let sane = partial.censored > 1_800 && partial.censored < 2_200 && partial.mean == 1.0;
    verdict(
        engines && oracle && potential && sim && sane,
        format!(
            "exact inf={engines}, oracle Mu1Zero={oracle}, potential Mu1Zero={potential}, sim censored={sim}, pinned censored {}/3000",
            partial.censored
        ),
    )
}

fn optimizer() -> Verdict {
    let settings = OptimizeSettings {
        workers: workers(),
        ..OptimizeSettings::default()
    };
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [64, 256] {
        let report = optimize_full_simplex_with(n, DEFAULT_ITERS, 0, &settings).unwrap();
        let target = report.baseline_values["harmonic"].min(report.baseline_values["pow2"]);
        ok &= report.best_value <= target;
        notes.push(format!("n={n}: {:.4} vs {target:.4}", report.best_value));
    }
    let report = optimize_full_simplex_with(2, DEFAULT_ITERS, 0, &settings).unwrap();
    let mu1 = report.best_dist.weight(1);
    ok &= mu1 >= 0.99 && (report.best_value - 1.5).abs() <= 0.015;
    notes.push(format!(
        "n=2: mu(1)={mu1:.6} value {:.6}",
        report.best_value
    ));
    verdict(ok, notes.join("; "))
}

fn continuous() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();

    let p = 5.0;
    let boundary = scale_invariant_from_uniform(p, 0.0) == 1.0
        && rel_gap(scale_invariant_from_uniform(p, 1.0), (-p).exp()) < 1e-15;
    ok &= boundary;
    let draws = 100_000;
    let mut r = stream_rng(5, 0);
    let mut xs: Vec<f64> = (0..draws)
        .map(|_| sample_scale_invariant(p, &mut r))
        .collect();
    xs.sort_by(f64::total_cmp);
    let median = xs[draws / 2];
    // delta method: sd of the sample median of u is 1/(2 sqrt N), and d = exp(-p u)
    let want = (-p / 2.0).exp();
    let sigma = p * want / (2.0 * (draws as f64).sqrt());
    let median_ok = (median - want).abs() <= 3.0 * sigma;
    ok &= median_ok;
    notes.push(format!(
        "boundaries={boundary}, median {median:.5} vs {want:.5} (3 sd {:.5})",
        3.0 * sigma
    ));

    let eps: Vec<f64> = (5..=12).map(|k| 2f64.powi(-k)).collect();
    let table = precision_scaling(&eps, 10_000, 6, workers()).unwrap();
    let mut halving_ok = true;
    let mut monotone = true;
    for (i, row) in table.rows.iter().enumerate() {
        halving_ok &= row.halving_rate >= 0.5 * LN_2 / (2.0 * row.p) - 3.0 * row.halving_rate_se;
        if i > 0 {
            let prev = &table.rows[i - 1];
            let se = (row.std_error.powi(2) + prev.std_error.powi(2)).sqrt();
            monotone &= row.mean_steps >= prev.mean_steps - 3.0 * se;
        }
    }
    let fit_ok = table.fit_residual <= 0.25;
    ok &= halving_ok && monotone && fit_ok;
    notes.push(format!(
        "fit c={:.4} residual {:.3}, halving bound={halving_ok}, monotone={monotone}",
        table.fit_coefficient, table.fit_residual
    ));

    let cfg = ContinuousConfig::new((-5.0f64).exp()).unwrap();
    let row = summarize(&cfg, &simulate_many(&cfg, 10_000, 7, workers()));
    let bound = 3.0 / LN_2 * cfg.precision * (1.0 / cfg.epsilon).log2();
    ok &= row.mean_steps <= bound && row.censored == 0;
    notes.push(format!("p=5 mean {:.2} <= {bound:.2}", row.mean_steps));
    verdict(ok, notes.join("; "))
}

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, budget: Duration, elapsed: Duration, v: Verdict| {
        let pass = v.pass && elapsed <= budget;
        failures += usize::from(!pass);
        println!(
            "{} {id} {name} ({:.1}s, budget {}s): {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            v.detail
        );
    };
    let timed = |f: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| verdict(false, "panicked"));
        (start.elapsed(), v)
    };
    let secs = Duration::from_secs;

    let (t, v) = timed(&lemma2_equivalence);
    report(1, "uniform-start routes agree", secs(10), t, v);
    let (t, v) = timed(&oracle_agreement);
    report(2, "chain-sum oracle agrees", secs(60), t, v);

    let start = Instant::now();
    let entries = catch_unwind(pool).ok();
    let pool_time = start.elapsed();
    match &entries {
        Some(entries) => {
            report(
                3,
                "expected potential drop at most 7",
                secs(300),
                pool_time,
                main_lemma(entries),
            );
            report(
                4,
                "lower bound <= E <= upper bound",
                secs(300),
                pool_time,
                sandwich(entries),
            );
        }
        None => {
            report(
                3,
                "expected potential drop at most 7",
                secs(300),
                pool_time,
                verdict(false, "panicked"),
            );
            report(
                4,
                "lower bound <= E <= upper bound",
                secs(300),
                pool_time,
                verdict(false, "panicked"),
            );
        }
    }

    let (t, v) = timed(&scaling_band);
    report(5, "(log n)^2 scaling band", secs(180), t, v);
    let (t, v) = timed(&monte_carlo);
    report(6, "Monte Carlo matches exact values", secs(30), t, v);
    let (t, v) = timed(&mu1_zero);
    report(7, "mu(1) = 0 gives infinity and censoring", secs(30), t, v);
    let (t, v) = timed(&optimizer);
    report(8, "optimizer beats baselines", secs(300), t, v);
    let (t, v) = timed(&continuous);
    report(9, "continuous search statistics", secs(120), t, v);

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
