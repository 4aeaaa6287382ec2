//! Step-size distributions on `[1, n]`.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{kahan_sum, KahanSum, Scalar};

/// Tolerance within which file-supplied probabilities are silently rescaled.
pub const RENORMALIZE_TOL: f64 = 1e-6;

/// A probability distribution `mu` over step sizes `1..=n`, with its prefix
/// CDF `F(a) = mu([1, a])`. Immutable once built.
#[derive(Debug, Clone)]
pub struct StepDistribution<T> {
    n: usize,
    weights: Vec<T>,
    cdf: Vec<T>,
    mu1_positive: bool,
    sampler: Sampler,
}

#[derive(Debug, Clone)]
enum Sampler {
    InverseCdf(Vec<f64>),
    Alias(AliasTable),
}

impl<T: Scalar> StepDistribution<T> {
    /// Normalizes arbitrary nonnegative weights (index 0 is step 1).
    pub fn make_custom(n: usize, raw: &[T]) -> Result<Self> {
        check_raw(n, raw)?;
        let total = kahan_sum(raw.iter().copied());
        if total.is_zero() {
            return Err(Error::ZeroMass);
        }
        let weights = raw.iter().map(|&w| w / total).collect();
        Ok(Self::from_normalized(n, weights))
    }

    /// Accepts weights that are already probabilities, as read from a file.
    /// Sums off by more than [`RENORMALIZE_TOL`] are rejected.
    pub fn from_probabilities(n: usize, probs: &[T]) -> Result<Self> {
        check_raw(n, probs)?;
        let total = kahan_sum(probs.iter().copied());
        if total.is_zero() {
            return Err(Error::ZeroMass);
        }
        if !total.close_to(T::one(), RENORMALIZE_TOL) {
            return Err(Error::NotNormalized { sum: total.lossy() });
        }
        if total.close_to(T::one(), T::MASS_TOL) {
            return Ok(Self::from_normalized(n, probs.to_vec()));
        }
        Self::make_custom(n, probs)
    }

    /// `mu(d) = 1 / (d * H_n)`.
    pub fn harmonic(n: usize) -> Result<Self> {
        let raw: Vec<T> = (1..=n).map(|d| T::one() / T::of_usize(d)).collect();
        Self::make_custom(n, &raw)
    }

    /// Equal mass on the powers of two below `2^L`, `L = floor(log2 n)`.
    /// For `n = 1` the support would be empty, so `mu(1) = 1` instead.
    pub fn pow2(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDomain);
        }
        let levels = floor_log2(n);
        let mut raw = vec![T::zero(); n];
        if levels == 0 {
            raw[0] = T::one();
        } else {
            for i in 0..levels {
                raw[(1usize << i) - 1] = T::one();
            }
        }
        Self::make_custom(n, &raw)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::make_custom(n, &vec![T::one(); n])
    }

    /// `mu(d) = B^(d-1) (B-1) / (B^n - 1)`: nearly all mass on the longest
    /// step. Evaluated as `B^(d-n) * (1 - 1/B) / (1 - B^-n)` so no power of
    /// `B` ever overflows; fails with [`Error::Overflow`] when `mu(1)`
    /// underflows in `T`.
    pub fn adversarial_geometric(n: usize, base: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDomain);
        }
        if !(base > 1.0 && base.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "base must be > 1, got {base}"
            )));
        }
        let ln_b = base.ln();
        let ratio = T::of((-ln_b).exp_m1() / (-(n as f64) * ln_b).exp_m1());
        let weights: Vec<T> = (1..=n)
            .map(|d| ratio * T::of((d as f64 - n as f64) * ln_b).exp())
            .collect();
        if weights[0].is_zero() {
            return Err(Error::Overflow {
                log_mass: n as f64 * ln_b,
                scalar: T::NAME,
            });
        }
        Self::make_custom(n, &weights)
    }

    fn from_normalized(n: usize, weights: Vec<T>) -> Self {
        // the compensated running sum can dip by an ulp; a CDF must not
        let mut acc = KahanSum::new();
        let mut prev = T::zero();
        let cdf: Vec<T> = weights
            .iter()
            .map(|&w| {
                acc.add(w);
                prev = prev.max_of(acc.value());
                prev
            })
            .collect();
        let mu1_positive = weights[0] > T::zero();
        let sample_cdf = cdf.iter().map(|c| c.lossy()).collect();
        Self {
            n,
            weights,
            cdf,
            mu1_positive,
            sampler: Sampler::InverseCdf(sample_cdf),
        }
    }

    /// Switches sampling to an O(1) alias table.
    pub fn with_alias_sampler(mut self) -> Self {
        let probs: Vec<f64> = self.weights.iter().map(|w| w.lossy()).collect();
        self.sampler = Sampler::Alias(AliasTable::new(&probs));
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `mu(1..=n)`, index 0 holding `mu(1)`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `F(1..=n)`, index 0 holding `F(1)`.
    pub fn cdf_table(&self) -> &[T] {
        &self.cdf
    }

    pub fn mu1_positive(&self) -> bool {
        self.mu1_positive
    }

    /// `mu(d)`, zero outside `1..=n`.
    pub fn weight(&self, d: usize) -> T {
        if d == 0 || d > self.n {
            T::zero()
        } else {
            self.weights[d - 1]
        }
    }

    /// `F(a)` for `0 <= a <= n`.
    pub fn cdf(&self, a: usize) -> Result<T> {
        match a {
            0 => Ok(T::zero()),
            a if a <= self.n => Ok(self.cdf[a - 1]),
            _ => Err(Error::OutOfRange {
                state: a,
                n: self.n,
            }),
        }
    }

    /// `F(a)` without the range check; `a` beyond `n` gives `F(n)`.
    pub(crate) fn cdf_at(&self, a: usize) -> T {
        if a == 0 {
            T::zero()
        } else {
            self.cdf[a.min(self.n) - 1]
        }
    }

    /// Draws a step size.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.sampler {
            Sampler::InverseCdf(_) => self.sample_with_uniform(rng.random::<f64>()),
            Sampler::Alias(table) => table.sample(rng),
        }
    }

    /// Inverse-CDF lookup: the smallest `d` with `F(d) > u`, for `u` in `[0, 1)`.
    pub fn sample_with_uniform(&self, u: f64) -> usize {
        let cdf = match &self.sampler {
            Sampler::InverseCdf(c) => c.as_slice(),
            Sampler::Alias(_) => return self.fallback_inverse(u),
        };
        let idx = cdf.partition_point(|&c| c <= u);
        if idx < self.n {
            idx + 1
        } else {
            self.last_supported()
        }
    }

    fn fallback_inverse(&self, u: f64) -> usize {
        let idx = self.cdf.partition_point(|c| c.lossy() <= u);
        if idx < self.n {
            idx + 1
        } else {
            self.last_supported()
        }
    }

    // F(n) may round below u; fall back to the largest step with mass.
    fn last_supported(&self) -> usize {
        self.weights
            .iter()
            .rposition(|w| *w > T::zero())
            .map_or(self.n, |i| i + 1)
    }

    /// The `{"n": .., "weights": [..]}` file form.
    pub fn to_file(&self) -> DistFile {
        DistFile::Weights {
            n: self.n,
            weights: self.weights.iter().map(|w| w.lossy()).collect(),
        }
    }

    /// Converts to another scalar type (through `f64` for the weights).
    pub fn cast<U: Scalar>(&self) -> Result<StepDistribution<U>> {
        let w: Vec<U> = self.weights.iter().map(|w| U::of(w.lossy())).collect();
        StepDistribution::make_custom(self.n, &w)
    }
}

fn check_raw<T: Scalar>(n: usize, raw: &[T]) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyDomain);
    }
    if raw.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: raw.len(),
        });
    }
    for (i, &w) in raw.iter().enumerate() {
        if !w.is_finite() || w < T::zero() {
            return Err(Error::NegativeWeight {
                step: i + 1,
                value: w.lossy(),
            });
        }
    }
    Ok(())
}

/// `floor(log2 n)` for `n >= 1`.
pub fn floor_log2(n: usize) -> usize {
    debug_assert!(n >= 1);
    (usize::BITS - 1 - n.leading_zeros()) as usize
}

/// Vose alias table over `0..n`, returning 1-based steps.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let total: f64 = kahan_sum(weights.iter().copied());
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
        }
        Self { prob, alias }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.prob.len());
        let coin: f64 = rng.random();
        if coin < self.prob[i] {
            i + 1
        } else {
            self.alias[i] + 1
        }
    }
}

/// On-disk distribution description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistFile {
    Weights { n: usize, weights: Vec<f64> },
    Kind { n: usize, kind: KindSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KindSpec {
    Named(NamedKind),
    Adversarial { adversarial: AdversarialParams },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedKind {
    Harmonic,
    Pow2,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialParams {
    #[serde(rename = "B")]
    pub base: f64,
}

impl DistFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::BadFile(e.to_string()))
    }

    pub fn n(&self) -> usize {
        match self {
            DistFile::Weights { n, .. } | DistFile::Kind { n, .. } => *n,
        }
    }

    pub fn build<T: Scalar>(&self) -> Result<StepDistribution<T>> {
        match self {
            DistFile::Weights { n, weights } => {
                let w: Vec<T> = weights.iter().map(|&x| T::of(x)).collect();
                StepDistribution::from_probabilities(*n, &w)
            }
            DistFile::Kind { n, kind } => {
                let spec = match kind {
                    KindSpec::Named(NamedKind::Harmonic) => DistSpec::Harmonic,
                    KindSpec::Named(NamedKind::Pow2) => DistSpec::Pow2,
                    KindSpec::Named(NamedKind::Uniform) => DistSpec::Uniform,
                    KindSpec::Adversarial { adversarial } => {
                        DistSpec::Adversarial(Base::Fixed(adversarial.base))
                    }
                };
                spec.build(Some(*n))
            }
        }
    }
}

/// Base of the adversarial geometric distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Base {
    Fixed(f64),
    /// `B = n^k`.
    PowerOfN(f64),
}

impl Base {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            Base::Fixed(b) => b,
            Base::PowerOfN(k) => (n as f64).powf(k),
        }
    }
}

/// Strategy selector: `harmonic | pow2 | uniform | adversarial:B=<float> |
/// adversarial:B=n^<k> | file:<path>`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    Harmonic,
    Pow2,
    Uniform,
    Adversarial(Base),
    File(PathBuf),
}

impl DistSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "harmonic" => return Ok(DistSpec::Harmonic),
            "pow2" => return Ok(DistSpec::Pow2),
            "uniform" => return Ok(DistSpec::Uniform),
            _ => {}
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(DistSpec::File(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("adversarial:") {
            let value = rest
                .strip_prefix("B=")
                .ok_or_else(|| Error::UnknownName(s.to_string()))?;
            let bad = || Error::UnknownName(s.to_string());
            if let Some(k) = value.strip_prefix("n^") {
                return Ok(DistSpec::Adversarial(Base::PowerOfN(
                    k.parse().map_err(|_| bad())?,
                )));
            }
            return Ok(DistSpec::Adversarial(Base::Fixed(
                value.parse().map_err(|_| bad())?,
            )));
        }
        Err(Error::UnknownName(s.to_string()))
    }

    /// Builds the distribution. Named kinds need `n`; a file carries its
    /// own `n`, which must agree with `n` when both are given.
    pub fn build<T: Scalar>(&self, n: Option<usize>) -> Result<StepDistribution<T>> {
        let need_n = || n.ok_or_else(|| Error::InvalidParameter("--n is required".into()));
        match self {
            DistSpec::Harmonic => StepDistribution::harmonic(need_n()?),
            DistSpec::Pow2 => StepDistribution::pow2(need_n()?),
            DistSpec::Uniform => StepDistribution::uniform(need_n()?),
            DistSpec::Adversarial(base) => {
                let n = need_n()?;
                StepDistribution::adversarial_geometric(n, base.resolve(n))
            }
            DistSpec::File(path) => {
                let file = DistFile::read(path)?;
                if let Some(n) = n {
                    if n != file.n() {
                        return Err(Error::LengthMismatch {
                            expected: n,
                            got: file.n(),
                        });
                    }
                }
                file.build()
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            DistSpec::Harmonic => "harmonic".into(),
            DistSpec::Pow2 => "pow2".into(),
            DistSpec::Uniform => "uniform".into(),
            DistSpec::Adversarial(Base::Fixed(b)) => format!("adversarial:B={b}"),
            DistSpec::Adversarial(Base::PowerOfN(k)) => format!("adversarial:B=n^{k}"),
            DistSpec::File(p) => format!("file:{}", p.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ExtF64;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type D = StepDistribution<f64>;

    #[test]
    fn custom_normalizes() {
        let d = D::make_custom(1, &[5.0]).unwrap();
        assert_eq!(d.weights(), &[1.0]);
        let d = D::make_custom(2, &[1.0, 1.0]).unwrap();
        assert_eq!(d.weights(), &[0.5, 0.5]);
        assert_eq!(d.cdf_table(), &[0.5, 1.0]);
        let d = D::make_custom(3, &[0.0, 0.0, 2.0]).unwrap();
        assert_eq!(d.weights(), &[0.0, 0.0, 1.0]);
        assert!(!d.mu1_positive());
    }

    #[test]
    fn custom_rejects_bad_input() {
        assert!(matches!(
            D::make_custom(2, &[0.0, 0.0]),
            Err(Error::ZeroMass)
        ));
        assert!(matches!(
            D::make_custom(2, &[1.0, -1.0]),
            Err(Error::NegativeWeight { step: 2, .. })
        ));
        assert!(matches!(
            D::make_custom(2, &[f64::NAN, 1.0]),
            Err(Error::NegativeWeight { .. })
        ));
        assert!(matches!(
            D::make_custom(3, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(D::make_custom(0, &[]), Err(Error::EmptyDomain)));
    }

    #[test]
    fn probabilities_within_tolerance_are_accepted() {
        let d = D::from_probabilities(2, &[0.5, 0.5 + 5e-7]).unwrap();
        assert_abs_diff_eq!(d.cdf(2).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            D::from_probabilities(2, &[0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn harmonic_weights() {
        assert_eq!(D::harmonic(1).unwrap().weights(), &[1.0]);
        let h2 = D::harmonic(2).unwrap();
        assert_abs_diff_eq!(h2.weight(1), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h2.weight(2), 1.0 / 3.0, epsilon = 1e-15);
        let h4 = D::harmonic(4).unwrap();
        for (d, want) in [(1, 0.48), (2, 0.24), (3, 0.16), (4, 0.12)] {
            assert_abs_diff_eq!(h4.weight(d), want, epsilon = 1e-14);
        }
        let h = D::harmonic(1000).unwrap();
        let c = h.weight(1);
        for d in 1..=1000 {
            assert!((d as f64 * h.weight(d) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn pow2_weights() {
        assert_eq!(D::pow2(4).unwrap().weights(), &[0.5, 0.5, 0.0, 0.0]);
        let p8 = D::pow2(8).unwrap();
        for d in [1, 2, 4] {
            assert_abs_diff_eq!(p8.weight(d), 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(p8.weight(8), 0.0);
        assert_eq!(D::pow2(1).unwrap().weights(), &[1.0]);
    }

    #[test]
    fn adversarial_weights() {
        assert_eq!(D::adversarial_geometric(1, 7.0).unwrap().weights(), &[1.0]);
        let d = D::adversarial_geometric(2, 8.0).unwrap();
        assert_abs_diff_eq!(d.weight(1), 1.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.weight(2), 8.0 / 9.0, epsilon = 1e-15);
        let d = D::adversarial_geometric(3, 2.0).unwrap();
        for (k, want) in [(1, 1.0 / 7.0), (2, 2.0 / 7.0), (3, 4.0 / 7.0)] {
            assert_abs_diff_eq!(d.weight(k), want, epsilon = 1e-15);
        }
        assert!(D::adversarial_geometric(3, 1.0).is_err());
    }

    #[test]
    fn adversarial_underflow_is_reported_in_f64_but_not_ext() {
        let n = 64;
        let b = (n as f64).powi(3);
        assert!(matches!(
            D::adversarial_geometric(n, b),
            Err(Error::Overflow { .. })
        ));
        let d = StepDistribution::<ExtF64>::adversarial_geometric(n, b).unwrap();
        assert!(d.mu1_positive());
        let ratio = (d.weight(2) / d.weight(1)).lossy();
        assert!((ratio / b - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cdf_queries() {
        let h2 = D::harmonic(2).unwrap();
        assert_eq!(h2.cdf(0).unwrap(), 0.0);
        assert_abs_diff_eq!(h2.cdf(1).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h2.cdf(2).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(h2.cdf(3), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn sampling_boundaries() {
        let point = D::make_custom(3, &[0.0, 0.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| point.sample(&mut rng) == 3));
        let h = D::harmonic(4).unwrap();
        assert_eq!(h.sample_with_uniform(0.0), 1);
        assert_eq!(h.sample_with_uniform(f64::MIN_POSITIVE), 1);
        assert_eq!(h.sample_with_uniform(0.9999999999999999), 4);
        let p = D::pow2(8).unwrap();
        assert_eq!(p.sample_with_uniform(0.9999999999999999), 4);
    }

    #[test]
    fn alias_table_reproduces_weights() {
        let w = [0.48, 0.24, 0.16, 0.12];
        let d = D::make_custom(4, &w).unwrap().with_alias_sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 400_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[d.sample(&mut rng) - 1] += 1;
        }
        for (c, p) in counts.iter().zip(w) {
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((*c as f64 / draws as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn spec_grammar() {
        assert_eq!(DistSpec::parse("harmonic").unwrap(), DistSpec::Harmonic);
        assert_eq!(
            DistSpec::parse("adversarial:B=8").unwrap(),
            DistSpec::Adversarial(Base::Fixed(8.0))
        );
        assert_eq!(
            DistSpec::parse("adversarial:B=n^3").unwrap(),
            DistSpec::Adversarial(Base::PowerOfN(3.0))
        );
        assert_eq!(
            DistSpec::parse("file:a.json").unwrap(),
            DistSpec::File("a.json".into())
        );
        assert!(matches!(
            DistSpec::parse("zipf"),
            Err(Error::UnknownName(_))
        ));
        assert!(matches!(
            DistSpec::parse("adversarial:8"),
            Err(Error::UnknownName(_))
        ));
    }

    #[test]
    fn file_forms_parse() {
        let f: DistFile = serde_json::from_str(r#"{"n": 2, "weights": [0.25, 0.75]}"#).unwrap();
        assert_eq!(f.build::<f64>().unwrap().weights(), &[0.25, 0.75]);
        let f: DistFile = serde_json::from_str(r#"{"n": 4, "kind": "pow2"}"#).unwrap();
        assert_eq!(f.build::<f64>().unwrap().weights(), &[0.5, 0.5, 0.0, 0.0]);
        let f: DistFile =
            serde_json::from_str(r#"{"n": 2, "kind": {"adversarial": {"B": 8.0}}}"#).unwrap();
        assert_abs_diff_eq!(
            f.build::<f64>().unwrap().weight(1),
            1.0 / 9.0,
            epsilon = 1e-15
        );
        assert!(serde_json::from_str::<DistFile>(r#"{"n": 2, "kind": "zipf"}"#).is_err());
    }
}
