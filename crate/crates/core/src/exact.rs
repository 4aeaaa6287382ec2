//! Exact expected absorption times and the dyadic upper bound.
//!
//! Three routes to the same quantity are provided so they can check each
//! other: the per-state recursion for `T_a`, the uniform-start recursions
//! `A^(s)` / `B^(s)`, and the chain enumeration in [`closed_form_oracle`].

use serde::Serialize;

use crate::dist::{floor_log2, StepDistribution};
use crate::error::{Error, Result};
use crate::scalar::{KahanSum, Scalar};

/// Default largest `n` accepted by the O(n^2) engines.
pub const DEFAULT_N_CAP: usize = 32_768;

/// Largest `n` for which the chain enumeration is attempted.
pub const ORACLE_MAX_N: usize = 20;

/// Expected absorption times from every fixed start and every uniform start.
#[derive(Debug, Clone, Serialize)]
pub struct HittingProfile<T> {
    pub n: usize,
    pub e_value: T,
    /// `T_a`, index `a` in `0..=n`.
    pub t: Vec<T>,
    /// `A^(s)`, expected time from a uniform start on `[1, s]`.
    pub a_uniform: Vec<T>,
    pub finite: bool,
    /// Largest relative disagreement between `A^(s)` from its own recursion
    /// and the prefix average of `T_a`.
    #[serde(skip)]
    pub route_gap: f64,
}

/// `B^(s)`: expected absorption time of the deferred-decision chain from `s`.
#[derive(Debug, Clone, Serialize)]
pub struct DeferredTable<T> {
    pub b: Vec<T>,
    pub finite: bool,
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::CapExceeded { n, cap })
    } else {
        Ok(())
    }
}

pub fn hitting_profile<T: Scalar>(dist: &StepDistribution<T>) -> Result<HittingProfile<T>> {
    hitting_profile_capped(dist, DEFAULT_N_CAP)
}

pub fn hitting_profile_capped<T: Scalar>(
    dist: &StepDistribution<T>,
    cap: usize,
) -> Result<HittingProfile<T>> {
    let n = dist.n();
    check_cap(n, cap)?;
    let t = fixed_start_times(dist);

    if !dist.mu1_positive() {
        let mut a_uniform = vec![T::infinity(); n + 1];
        a_uniform[0] = T::zero();
        return Ok(HittingProfile {
            n,
            e_value: T::infinity(),
            t,
            a_uniform,
            finite: false,
            route_gap: 0.0,
        });
    }

    let a_uniform = uniform_start_times(dist);
    let mut prefix = KahanSum::new();
    let mut route_gap = 0.0f64;
    for s in 1..=n {
        prefix.add(t[s]);
        let avg = prefix.value() / T::of_usize(s);
        let gap = ((avg - a_uniform[s]).abs() / a_uniform[s].abs().max_of(T::one())).lossy();
        route_gap = route_gap.max(gap);
    }
    let e_value = a_uniform[n];
    Ok(HittingProfile {
        n,
        e_value,
        t,
        a_uniform,
        finite: e_value.is_finite(),
        route_gap,
    })
}

/// `T_0 = 0`, `T_a = (1 + sum_{d<=a} mu(d) T_{a-d}) / F(a)`.
///
/// Zero-mass steps are skipped, so with `mu(1) = 0` states that can still
/// reach 0 keep finite values while the rest become infinite.
fn fixed_start_times<T: Scalar>(dist: &StepDistribution<T>) -> Vec<T> {
    let n = dist.n();
    let w = dist.weights();
    let mut t = vec![T::zero(); n + 1];
    for a in 1..=n {
        let mut acc = KahanSum::new();
        acc.add(T::one());
        for d in 1..=a {
            let mu = w[d - 1];
            if !mu.is_zero() {
                acc.add(mu * t[a - d]);
            }
        }
        t[a] = acc.value() / dist.cdf_at(a);
    }
    t
}

/// `A^(s)` by conditioning on the first step's size `d` and on where the
/// uniform start lies relative to it (below, at, or above `d`).
fn uniform_start_times<T: Scalar>(dist: &StepDistribution<T>) -> Vec<T> {
    let n = dist.n();
    let w = dist.weights();
    let mut a = vec![T::zero(); n + 1];
    for s in 1..=n {
        let inv_s = T::one() / T::of_usize(s);
        let mut acc = KahanSum::new();
        acc.add(T::one());
        for d in 1..=s {
            let mu = w[d - 1];
            if mu.is_zero() {
                continue;
            }
            let below = T::of_usize(d - 1) * inv_s * a[d - 1];
            let above = T::of_usize(s - d) * inv_s * a[s - d];
            acc.add(mu * (below + above));
        }
        a[s] = acc.value() / dist.cdf_at(s);
    }
    a
}

pub fn deferred_expectation<T: Scalar>(dist: &StepDistribution<T>) -> Result<DeferredTable<T>> {
    deferred_expectation_capped(dist, DEFAULT_N_CAP)
}

/// `B^(s) = (1 + sum_{1<=s'<s} (mu(s'+1) + mu(s-s')) (s'/s) B^(s')) / F(s)`.
pub fn deferred_expectation_capped<T: Scalar>(
    dist: &StepDistribution<T>,
    cap: usize,
) -> Result<DeferredTable<T>> {
    let n = dist.n();
    check_cap(n, cap)?;
    let mut b = vec![T::zero(); n + 1];
    if !dist.mu1_positive() {
        b[1..].fill(T::infinity());
        return Ok(DeferredTable { b, finite: false });
    }
    for s in 1..=n {
        let inv_s = T::one() / T::of_usize(s);
        let mut acc = KahanSum::new();
        acc.add(T::one());
        for sp in 1..s {
            let mass = dist.weight(sp + 1) + dist.weight(s - sp);
            if !mass.is_zero() {
                acc.add(mass * T::of_usize(sp) * inv_s * b[sp]);
            }
        }
        b[s] = acc.value() / dist.cdf_at(s);
    }
    let finite = b[n].is_finite();
    Ok(DeferredTable { b, finite })
}

/// `E(T)` as `(1/n) sum over chains a_1 < ... < a_l in [1, n]` of
/// `prod mu(a_{k+1} - a_k) / prod F(a_k)`, by depth-first enumeration of
/// all `2^n - 1` chains.
pub fn closed_form_oracle<T: Scalar>(dist: &StepDistribution<T>) -> Result<T> {
    let n = dist.n();
    if n > ORACLE_MAX_N {
        return Err(Error::TooLarge {
            n,
            limit: ORACLE_MAX_N,
        });
    }
    if !dist.mu1_positive() {
        return Err(Error::Mu1Zero);
    }

    fn extend<T: Scalar>(
        dist: &StepDistribution<T>,
        last: usize,
        prod: T,
        total: &mut KahanSum<T>,
    ) {
        total.add(prod);
        for next in last + 1..=dist.n() {
            let mu = dist.weight(next - last);
            if !mu.is_zero() {
                extend(dist, next, prod * mu / dist.cdf_at(next), total);
            }
        }
    }

    let mut total = KahanSum::new();
    for first in 1..=n {
        extend(dist, first, T::one() / dist.cdf_at(first), &mut total);
    }
    Ok(total.value() / T::of_usize(n))
}

/// Masses `p_0..=p_L` of the dyadic intervals `I_i = [2^i, 2^(i+1))`,
/// with the last interval truncated to `[2^L, n]`.
pub fn interval_masses<T: Scalar>(dist: &StepDistribution<T>) -> Vec<T> {
    let levels = floor_log2(dist.n());
    let mut sums = vec![KahanSum::new(); levels + 1];
    for (i, &w) in dist.weights().iter().enumerate() {
        sums[floor_log2(i + 1)].add(w);
    }
    sums.iter().map(KahanSum::value).collect()
}

/// `3/p_0 + sum_{1<=i<=L-1} 2/p_i`; infinite when a needed mass is zero.
pub fn upper_bound<T: Scalar>(dist: &StepDistribution<T>) -> T {
    let p = interval_masses(dist);
    let levels = p.len() - 1;
    let needed = &p[..levels.max(1)];
    if needed.iter().any(|m| m.is_zero()) {
        return T::infinity();
    }
    let mut acc = KahanSum::new();
    acc.add(T::of(3.0) / p[0]);
    for &m in &p[1..levels.max(1)] {
        acc.add(T::of(2.0) / m);
    }
    acc.value()
}
