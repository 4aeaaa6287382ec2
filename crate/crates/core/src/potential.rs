//! Potential function for the deferred-decision process and the certified
//! lower bound it yields.
//!
//! Each position `a` carries weight `phi_a = 1 / (a * sigma_a)`, where
//! `sigma_a = sum_d mu(d) * sqrt(min(a, d) / max(a, d))` measures how much of
//! the step distribution is on the scale of `a`. The potential of state `s`
//! is `Phi(s) = phi_1 + ... + phi_s`. Its expected one-step decrease is at
//! most 7 for every distribution, so `Phi(n) / 7` bounds `E(T)` from below.

use serde::Serialize;

use crate::chain::s_transition_row;
use crate::dist::{floor_log2, StepDistribution};
use crate::error::{Error, Result};
use crate::exact::{interval_masses, DEFAULT_N_CAP};
use crate::scalar::{KahanSum, Scalar};

/// Proven bound on the expected potential drop per step.
pub const MAIN_LEMMA_C: f64 = 7.0;
/// Proven bound on the drop contributed by jumps to 0.
pub const DELTA0_BOUND: f64 = 2.0;
/// Proven bound on the drop contributed by moves to `1..s`.
pub const DELTA_MID_BOUND: f64 = 5.0;

/// Default decay constant for the per-interval diagnostics.
pub const DEFAULT_DECAY: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Serialize)]
pub struct PotentialProfile<T> {
    /// `sigma_a` for `a = 1..=n` (index `a - 1`).
    pub sigma: Vec<T>,
    /// `phi_a` for `a = 1..=n` (index `a - 1`).
    pub phi: Vec<T>,
    /// `Phi(s)` for `s = 0..=n`.
    pub big_phi: Vec<T>,
    pub phi0: T,
    /// `psi_i = 1 / sum_j p_j c^|j - i|` for each dyadic interval.
    pub psi: Vec<T>,
    /// Decay constant `c` used for `psi`.
    pub decay: f64,
}

impl<T: Scalar> PotentialProfile<T> {
    pub fn n(&self) -> usize {
        self.phi.len()
    }

    pub fn potential(&self, s: usize) -> T {
        self.big_phi[s]
    }

    /// Prefix sums `Psi_k = psi_0 + ... + psi_k`.
    pub fn big_psi(&self) -> Vec<T> {
        let mut acc = KahanSum::new();
        self.psi
            .iter()
            .map(|&p| {
                acc.add(p);
                acc.value()
            })
            .collect()
    }

    /// `sum_{a in I_i} phi_a` for every dyadic interval `I_i`.
    pub fn interval_phi_sums(&self) -> Vec<T> {
        let levels = floor_log2(self.n());
        let mut sums = vec![KahanSum::new(); levels + 1];
        for (i, &p) in self.phi.iter().enumerate() {
            sums[floor_log2(i + 1)].add(p);
        }
        sums.iter().map(KahanSum::value).collect()
    }
}

pub fn potential_profile<T: Scalar>(dist: &StepDistribution<T>) -> Result<PotentialProfile<T>> {
    potential_profile_with_decay(dist, DEFAULT_DECAY)
}

/// Builds the profile in O(n) using `sigma_a = P(a)/sqrt(a) + sqrt(a) Q(a)`
/// with `P(a) = sum_{d<=a} mu(d) sqrt(d)` and `Q(a) = sum_{d>a} mu(d)/sqrt(d)`.
pub fn potential_profile_with_decay<T: Scalar>(
    dist: &StepDistribution<T>,
    decay: f64,
) -> Result<PotentialProfile<T>> {
    if !(decay > 0.5 && decay < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "decay must lie in (1/2, 1), got {decay}"
        )));
    }
    if !dist.mu1_positive() {
        return Err(Error::Mu1Zero);
    }
    let n = dist.n();
    let w = dist.weights();
    let roots: Vec<T> = (1..=n).map(|a| T::of_usize(a).sqrt()).collect();

    let mut below = vec![T::zero(); n];
    let mut acc = KahanSum::new();
    for a in 0..n {
        acc.add(w[a] * roots[a]);
        below[a] = acc.value();
    }
    let mut above = vec![T::zero(); n];
    let mut acc = KahanSum::new();
    for a in (0..n).rev() {
        above[a] = acc.value();
        acc.add(w[a] / roots[a]);
    }

    let sigma: Vec<T> = (0..n)
        .map(|i| below[i] / roots[i] + roots[i] * above[i])
        .collect();
    let phi: Vec<T> = sigma
        .iter()
        .enumerate()
        .map(|(i, &s)| T::one() / (T::of_usize(i + 1) * s))
        .collect();
    let mut big_phi = Vec::with_capacity(n + 1);
    big_phi.push(T::zero());
    let mut acc = KahanSum::new();
    for &p in &phi {
        acc.add(p);
        big_phi.push(acc.value());
    }
    let phi0 = big_phi[n];

    let masses = interval_masses(dist);
    let c = T::of(decay);
    let psi = (0..masses.len())
        .map(|i| {
            let mut acc = KahanSum::new();
            let mut factor = T::one();
            // walk outwards from i, multiplying c once per unit of distance
            for dist_to in 0..masses.len() {
                if dist_to > 0 {
                    factor *= c;
                }
                if i >= dist_to && dist_to > 0 {
                    acc.add(masses[i - dist_to] * factor);
                }
                if i + dist_to < masses.len() {
                    acc.add(masses[i + dist_to] * factor);
                }
            }
            T::one() / acc.value()
        })
        .collect();

    Ok(PotentialProfile {
        sigma,
        phi,
        big_phi,
        phi0,
        psi,
        decay,
    })
}

/// `E(Phi(S_{t-1}) - Phi(S_t) | S_{t-1} = s)`, summed over the exact kernel.
pub fn expected_drop<T: Scalar>(
    dist: &StepDistribution<T>,
    profile: &PotentialProfile<T>,
    s: usize,
) -> Result<T> {
    if s == 0 || s > dist.n() {
        return Err(Error::OutOfRange {
            state: s,
            n: dist.n(),
        });
    }
    let row = s_transition_row(dist, s)?;
    let top = profile.potential(s);
    Ok(row
        .entries
        .iter()
        .map(|&(to, p)| (top - profile.potential(to)) * p)
        .collect::<KahanSum<T>>()
        .value())
}

/// Per-state expected drop split into the jump-to-0 part and the rest.
#[derive(Debug, Clone, Serialize)]
pub struct DropReport<T> {
    /// Index `s - 1` for `s = 1..=n`.
    pub per_state_drop: Vec<T>,
    pub max_drop: T,
    pub per_state_delta0: Vec<T>,
    pub per_state_delta_mid: Vec<T>,
}

impl<T: Scalar> DropReport<T> {
    pub fn max_delta0(&self) -> T {
        max_of(&self.per_state_delta0)
    }

    pub fn max_delta_mid(&self) -> T {
        max_of(&self.per_state_delta_mid)
    }

    /// Whether every state satisfies the three proven bounds.
    pub fn within_proven_bounds(&self) -> bool {
        self.max_drop <= T::of(MAIN_LEMMA_C)
            && self.max_delta0() < T::of(DELTA0_BOUND)
            && self.max_delta_mid() < T::of(DELTA_MID_BOUND)
    }

    /// CSV rows `(s, drop, delta0, delta_mid)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, T, T, T)> + '_ {
        (0..self.per_state_drop.len()).map(move |i| {
            (
                i + 1,
                self.per_state_drop[i],
                self.per_state_delta0[i],
                self.per_state_delta_mid[i],
            )
        })
    }
}

fn max_of<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().fold(T::zero(), T::max_of)
}

pub fn drop_bound_report<T: Scalar>(dist: &StepDistribution<T>) -> Result<DropReport<T>> {
    drop_bound_report_capped(dist, DEFAULT_N_CAP)
}

pub fn drop_bound_report_capped<T: Scalar>(
    dist: &StepDistribution<T>,
    cap: usize,
) -> Result<DropReport<T>> {
    let n = dist.n();
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    let profile = potential_profile(dist)?;
    drop_report_for(dist, &profile)
}

/// As [`drop_bound_report`], reusing an existing profile.
pub fn drop_report_for<T: Scalar>(
    dist: &StepDistribution<T>,
    profile: &PotentialProfile<T>,
) -> Result<DropReport<T>> {
    let n = dist.n();
    let mut per_state_drop = Vec::with_capacity(n);
    let mut per_state_delta0 = Vec::with_capacity(n);
    let mut per_state_delta_mid = Vec::with_capacity(n);
    for s in 1..=n {
        let row = s_transition_row(dist, s)?;
        let top = profile.potential(s);
        let mut to_zero = T::zero();
        let mut mid = KahanSum::new();
        for &(to, p) in &row.entries {
            let contribution = (top - profile.potential(to)) * p;
            if to == 0 {
                to_zero = contribution;
            } else if to < s {
                mid.add(contribution);
            }
        }
        per_state_delta0.push(to_zero);
        per_state_delta_mid.push(mid.value());
        per_state_drop.push(expected_drop(dist, profile, s)?);
    }
    let max_drop = max_of(&per_state_drop);
    Ok(DropReport {
        per_state_drop,
        max_drop,
        per_state_delta0,
        per_state_delta_mid,
    })
}

/// `Phi(n) / c`. With `strict`, `c` below the computed maximum drop is an error.
pub fn potential_lower_bound<T: Scalar>(
    dist: &StepDistribution<T>,
    c: f64,
    strict: bool,
) -> Result<T> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "drop constant must be positive, got {c}"
        )));
    }
    let profile = potential_profile(dist)?;
    if strict {
        let report = drop_report_for(dist, &profile)?;
        if T::of(c) < report.max_drop {
            return Err(Error::InvalidC {
                c,
                max_drop: report.max_drop.lossy(),
            });
        }
    }
    Ok(profile.phi0 / T::of(c))
}
