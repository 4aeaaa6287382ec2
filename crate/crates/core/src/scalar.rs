//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All exact computations (hitting times, potentials, bounds) are written
//! against [`Scalar`] so they run unchanged in `f32`, `f64`, or the
//! extended-exponent [`ExtF64`]. The latter exists because some strategies
//! (a geometric distribution with base `n^3`, for instance) put probability
//! mass of order `B^{-n}` on short steps, which underflows `f64` long before
//! `n` gets interesting, and the resulting expected times overflow it.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{Float, FromPrimitive, One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

/// Real-number type used by the exact engines.
pub trait Scalar:
    Copy
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + FromPrimitive
    + ToPrimitive
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Serialize
{
    /// Short name used in reports and CLI flags.
    const NAME: &'static str;

    /// Allowed deviation of a constructed distribution's total mass from 1.
    const MASS_TOL: f64;

    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn infinity() -> Self;
    fn is_finite(self) -> bool;
    fn is_nan(self) -> bool;

    /// Converts from `f64`. Values outside the type's range saturate.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion is total for Scalar types")
    }

    fn of_usize(x: usize) -> Self {
        Self::of(x as f64)
    }

    /// Nearest `f64`, saturating to infinities or zero outside its range.
    fn lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// `|self - other| <= tol * max(1, |other|)`.
    fn close_to(self, other: Self, tol: f64) -> bool {
        let scale = other.abs().max_of(Self::one());
        (self - other).abs() <= Self::of(tol) * scale
    }
}

macro_rules! impl_float_scalar {
    ($t:ty, $tol:expr) => {
        impl Scalar for $t {
            const NAME: &'static str = stringify!($t);
            const MASS_TOL: f64 = $tol;

            fn sqrt(self) -> Self {
                Float::sqrt(self)
            }
            fn ln(self) -> Self {
                Float::ln(self)
            }
            fn exp(self) -> Self {
                Float::exp(self)
            }
            fn infinity() -> Self {
                <$t>::INFINITY
            }
            fn is_finite(self) -> bool {
                Float::is_finite(self)
            }
            fn is_nan(self) -> bool {
                Float::is_nan(self)
            }
        }
    };
}

impl_float_scalar!(f64, 1e-12);
impl_float_scalar!(f32, 1e-5);

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> KahanSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        if !x.is_finite() || !self.sum.is_finite() {
            self.sum += x;
            return;
        }
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum
    }
}

impl<T: Scalar> FromIterator<T> for KahanSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn kahan_sum<T: Scalar, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<KahanSum<T>>().value()
}

/// `f64` mantissa paired with a 64-bit binary exponent.
///
/// Precision matches `f64`; range is effectively unbounded. The value is
/// `mant * 2^exp` with `1 <= |mant| < 2`, or `mant` zero/non-finite and
/// `exp == 0`.
#[derive(Clone, Copy, Default)]
pub struct ExtF64 {
    mant: f64,
    exp: i64,
}

const EXP_MASK: u64 = 0x7ff << 52;

/// `2^k` for `-1022 <= k <= 1023`.
fn pow2(k: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

impl ExtF64 {
    pub const ZERO: ExtF64 = ExtF64 { mant: 0.0, exp: 0 };
    pub const ONE: ExtF64 = ExtF64 { mant: 1.0, exp: 0 };

    fn normalized(mut mant: f64, mut exp: i64) -> Self {
        if mant == 0.0 || !mant.is_finite() {
            return Self { mant, exp: 0 };
        }
        let mut bits = mant.to_bits();
        if bits & EXP_MASK == 0 {
            // subnormal
            mant *= pow2(64);
            exp -= 64;
            bits = mant.to_bits();
        }
        let biased = ((bits & EXP_MASK) >> 52) as i64;
        let m = f64::from_bits((bits & !EXP_MASK) | (1023u64 << 52));
        Self {
            mant: m,
            exp: exp + biased - 1023,
        }
    }

    pub fn new(x: f64) -> Self {
        Self::normalized(x, 0)
    }

    /// `mant * 2^exp` for arbitrary `exp`.
    pub fn from_parts(mant: f64, exp: i64) -> Self {
        Self::normalized(mant, exp)
    }

    /// Natural logarithm as a plain `f64`; always representable.
    pub fn ln_f64(self) -> f64 {
        self.mant.ln() + self.exp as f64 * std::f64::consts::LN_2
    }

    /// Base-10 logarithm of the magnitude as a plain `f64`.
    pub fn log10_abs(self) -> f64 {
        self.mant.abs().log10() + self.exp as f64 * std::f64::consts::LOG10_2
    }

    fn to_f64_saturating(self) -> f64 {
        if self.mant == 0.0 || !self.mant.is_finite() {
            return self.mant;
        }
        if self.exp > 1023 {
            return self.mant.signum() * f64::INFINITY;
        }
        if self.exp < -1100 {
            return self.mant.signum() * 0.0;
        }
        if self.exp >= -1022 {
            self.mant * pow2(self.exp)
        } else {
            self.mant * pow2(self.exp + 100) * pow2(-100)
        }
    }

    /// Whether the value survives a round trip through `f64`.
    pub fn fits_f64(self) -> bool {
        !self.mant.is_finite() || self.mant == 0.0 || (-1022..=1023).contains(&self.exp)
    }
}

impl fmt::Debug for ExtF64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExtF64({}, 2^{})", self.mant, self.exp)
    }
}

impl fmt::Display for ExtF64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.fits_f64() {
            return fmt::Display::fmt(&self.to_f64_saturating(), f);
        }
        let l = self.log10_abs();
        let k = l.floor();
        let digits = 10f64.powf(l - k);
        let sign = if self.mant < 0.0 { "-" } else { "" };
        write!(f, "{sign}{digits:.15}e{k}")
    }
}

impl Serialize for ExtF64 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.fits_f64() {
            serializer.serialize_f64(self.to_f64_saturating())
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

impl PartialEq for ExtF64 {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for ExtF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.mant.is_nan() || other.mant.is_nan() {
            return None;
        }
        if !self.mant.is_finite() || !other.mant.is_finite() {
            return self.mant.partial_cmp(&other.mant);
        }
        let (sa, sb) = (sign_rank(self.mant), sign_rank(other.mant));
        if sa != sb {
            return Some(sa.cmp(&sb));
        }
        if sa == 0 {
            return Some(Ordering::Equal);
        }
        let mag = self
            .exp
            .cmp(&other.exp)
            .then(self.mant.abs().total_cmp(&other.mant.abs()));
        Some(if sa > 0 { mag } else { mag.reverse() })
    }
}

fn sign_rank(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

impl Add for ExtF64 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if rhs.mant == 0.0 {
            return self;
        }
        if self.mant == 0.0 {
            return rhs;
        }
        if !self.mant.is_finite() || !rhs.mant.is_finite() {
            return Self::new(self.mant + rhs.mant);
        }
        let (hi, lo) = if self.exp >= rhs.exp {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let diff = hi.exp - lo.exp;
        if diff > 60 {
            return hi;
        }
        Self::normalized(hi.mant + lo.mant * pow2(-diff), hi.exp)
    }
}

impl Sub for ExtF64 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for ExtF64 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::normalized(self.mant * rhs.mant, self.exp + rhs.exp)
    }
}

impl Div for ExtF64 {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self::normalized(self.mant / rhs.mant, self.exp - rhs.exp)
    }
}

impl Neg for ExtF64 {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            mant: -self.mant,
            exp: self.exp,
        }
    }
}

impl AddAssign for ExtF64 {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for ExtF64 {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for ExtF64 {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl DivAssign for ExtF64 {
    fn div_assign(&mut self, rhs: Self) {
        *self = *self / rhs;
    }
}

impl Zero for ExtF64 {
    fn zero() -> Self {
        Self::ZERO
    }
    fn is_zero(&self) -> bool {
        self.mant == 0.0
    }
}

impl One for ExtF64 {
    fn one() -> Self {
        Self::ONE
    }
}

impl FromPrimitive for ExtF64 {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Self::new(n as f64))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(Self::new(n as f64))
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Self::new(n))
    }
}

impl ToPrimitive for ExtF64 {
    fn to_i64(&self) -> Option<i64> {
        self.to_f64_saturating().to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.to_f64_saturating().to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.to_f64_saturating())
    }
}

impl Scalar for ExtF64 {
    const NAME: &'static str = "ext";
    const MASS_TOL: f64 = 1e-12;

    fn sqrt(self) -> Self {
        if self.mant < 0.0 {
            return Self::new(f64::NAN);
        }
        if !self.mant.is_finite() || self.mant == 0.0 {
            return Self::new(self.mant.sqrt());
        }
        let (m, e) = if self.exp.rem_euclid(2) == 1 {
            (self.mant * 2.0, self.exp - 1)
        } else {
            (self.mant, self.exp)
        };
        Self::normalized(m.sqrt(), e.div_euclid(2))
    }

    fn ln(self) -> Self {
        if self.mant <= 0.0 || !self.mant.is_finite() {
            return Self::new(self.mant.ln());
        }
        Self::new(self.ln_f64())
    }

    fn exp(self) -> Self {
        let x = self.to_f64_saturating();
        if x.is_nan() {
            return Self::new(f64::NAN);
        }
        if x > 4.0e18 {
            return Self::new(f64::INFINITY);
        }
        if x < -4.0e18 {
            return Self::ZERO;
        }
        let k = (x / std::f64::consts::LN_2).floor();
        let r = x - k * std::f64::consts::LN_2;
        Self::normalized(r.exp(), k as i64)
    }

    fn infinity() -> Self {
        Self::new(f64::INFINITY)
    }

    fn is_finite(self) -> bool {
        self.mant.is_finite()
    }

    fn is_nan(self) -> bool {
        self.mant.is_nan()
    }
}
