//! Exact dyadic rationals `n · 2^(-k)` and the floor quantizer.
//!
//! Values are kept in canonical form: the numerator is odd, or the value is
//! zero with scale 0. Structural equality is therefore value equality.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};
use core::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

/// Largest grid exponent supported by [`PrecisionGrid`]. Grid members are
/// stored as `i64` numerators, and products of two members must fit.
pub const MAX_GRID_EXPONENT: u32 = 30;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigInt,
    scale: u32,
}

impl Dyadic {
    pub fn new(num: impl Into<BigInt>, scale: u32) -> Self {
        let mut num = num.into();
        if num.is_zero() {
            return Self::zero();
        }
        let tz = num.trailing_zeros().unwrap_or(0);
        let shift = tz.min(u64::from(scale)) as u32;
        if shift > 0 {
            num >>= shift as usize;
        }
        Dyadic {
            num,
            scale: scale - shift,
        }
    }

    pub fn zero() -> Self {
        Dyadic {
            num: BigInt::zero(),
            scale: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic {
            num: BigInt::one(),
            scale: 0,
        }
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(v, 0)
    }

    /// `2^(-k)`.
    pub fn pow2_neg(k: u32) -> Self {
        Dyadic::new(1, k)
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    /// Canonical scale exponent `k` (smallest `k` with `value · 2^k` integral).
    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.num.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn abs(&self) -> Self {
        Dyadic {
            num: self.num.abs(),
            scale: self.scale,
        }
    }

    pub fn relu(&self) -> Self {
        if self.num.is_negative() {
            Self::zero()
        } else {
            self.clone()
        }
    }

    /// Numerator of this value expressed at scale `k`, if it is representable there.
    pub fn numerator_at(&self, k: u32) -> Option<BigInt> {
        if self.scale > k {
            None
        } else {
            Some(&self.num << (k - self.scale) as usize)
        }
    }

    /// Same as [`Dyadic::numerator_at`] but narrowed to `i64`.
    pub fn numerator_at_i64(&self, k: u32) -> Option<i64> {
        self.numerator_at(k)?.to_i64()
    }

    /// Floor quantization `[w]_γ = ⌊w · 2^m⌋ / 2^m`, rounding toward −∞.
    pub fn quantize(&self, m: u32) -> Self {
        if self.scale <= m {
            return self.clone();
        }
        let denom = BigInt::one() << (self.scale - m) as usize;
        Dyadic::new(self.num.div_floor(&denom), m)
    }

    pub fn to_f64(&self) -> f64 {
        // Exact for the magnitudes used here; very large numerators saturate.
        let n = self.num.to_f64().unwrap_or(f64::NAN);
        n * libm::exp2(-(self.scale as f64))
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, u32) {
        let k = self.scale.max(other.scale);
        let a = &self.num << (k - self.scale) as usize;
        let b = &other.num << (k - other.scale) as usize;
        (a, b, k)
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Self::zero()
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Serialized as `n/2^k` with decimal integers, e.g. `-5/2^3`.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.num, self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDyadicError(pub String);

impl fmt::Display for ParseDyadicError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid dyadic literal `{}` (expected n/2^k)", self.0)
    }
}

impl FromStr for Dyadic {
    type Err = ParseDyadicError;

    /// Accepts `n/2^k` and plain integers `n`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseDyadicError(s.to_string());
        let s = s.trim();
        match s.split_once('/') {
            None => BigInt::from_str(s).map(|n| Dyadic::new(n, 0)).map_err(|_| err()),
            Some((n, d)) => {
                let k = d.trim().strip_prefix("2^").ok_or_else(err)?;
                let k: u32 = k.parse().map_err(|_| err())?;
                let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
                Ok(Dyadic::new(n, k))
            }
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Add<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &'a Dyadic) -> Dyadic {
        let (a, b, k) = self.aligned(rhs);
        Dyadic::new(a + b, k)
    }
}

impl<'a> Sub<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &'a Dyadic) -> Dyadic {
        let (a, b, k) = self.aligned(rhs);
        Dyadic::new(a - b, k)
    }
}

impl<'a> Mul<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &'a Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &rhs.num, self.scale + rhs.scale)
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            num: -&self.num,
            scale: self.scale,
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Dyadic> for Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: Dyadic) -> Dyadic {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -&self
    }
}

impl core::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |acc, x| &acc + &x)
    }
}

/// Operation selector for [`exact_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Mul,
    Neg,
    Relu,
}

/// Exact binary/unary arithmetic; `b` is ignored for the unary operations.
pub fn exact_arith(a: &Dyadic, b: &Dyadic, op: ArithOp) -> Dyadic {
    match op {
        ArithOp::Add => a + b,
        ArithOp::Mul => a * b,
        ArithOp::Neg => -a,
        ArithOp::Relu => a.relu(),
    }
}

/// The grid `S_δ = {−1, −1+δ, …, 1}` with `δ = 2^(−k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrecisionGrid {
    exponent: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridTooFine(pub u32);

impl fmt::Display for GridTooFine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grid exponent {} exceeds the supported maximum {}",
            self.0, MAX_GRID_EXPONENT
        )
    }
}

impl PrecisionGrid {
    pub fn new(exponent: u32) -> Result<Self, GridTooFine> {
        if exponent > MAX_GRID_EXPONENT {
            Err(GridTooFine(exponent))
        } else {
            Ok(PrecisionGrid { exponent })
        }
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    /// `δ = 2^(−k)`.
    pub fn delta(&self) -> Dyadic {
        Dyadic::pow2_neg(self.exponent)
    }

    /// `2^k`, the numerator of `1` at this grid's scale.
    pub fn unit(&self) -> i64 {
        1i64 << self.exponent
    }

    /// `|S_δ| = 2^(k+1) + 1`.
    pub fn len(&self) -> u64 {
        (1u64 << (self.exponent + 1)) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, v: &Dyadic) -> bool {
        v.scale() <= self.exponent && v.abs() <= Dyadic::one()
    }

    /// Grid member from its numerator at scale `k`.
    pub fn value(&self, numerator: i64) -> Dyadic {
        Dyadic::new(numerator, self.exponent)
    }

    /// All members in increasing order.
    pub fn members(&self) -> Vec<Dyadic> {
        let u = self.unit();
        (-u..=u).map(|n| self.value(n)).collect()
    }

    /// Uniform numerator in `[-2^k, 2^k]`, or the same range without 0.
    pub fn sample_numerator<R: Rng + ?Sized>(&self, rng: &mut R, exclude_zero: bool) -> i64 {
        let u = self.unit();
        if exclude_zero {
            let i = rng.gen_range(0..(2 * u) as u64) as i64;
            if i < u {
                i - u
            } else {
                i - u + 1
            }
        } else {
            rng.gen_range(0..=(2 * u) as u64) as i64 - u
        }
    }

    /// Uniform draw from `S_δ` (or `S_δ ∖ {0}`).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, exclude_zero: bool) -> Dyadic {
        self.value(self.sample_numerator(rng, exclude_zero))
    }
}

/// Uniform draw from `S_δ`, optionally excluding zero.
pub fn grid_sample<R: Rng + ?Sized>(grid: PrecisionGrid, exclude_zero: bool, rng: &mut R) -> Dyadic {
    grid.sample(rng, exclude_zero)
}
