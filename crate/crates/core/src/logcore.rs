//! Log-domain scalars and exact integer indices.
//!
//! Every norm, weight product and Cesàro sum in the crate is carried as a
//! [`LogReal`]: a sign together with the natural logarithm of the magnitude.
//! Indices and horizons are [`BigIndex`] values, which stay exact even when
//! they run to hundreds of thousands of decimal digits.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign as BigSign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A real number stored as `sign * exp(logmag)`.
///
/// `sign == 0` is exact zero; `logmag` is then ignored (and kept at
/// `-inf` so that derived comparisons stay meaningful).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LogReal {
    sign: i8,
    logmag: f64,
}

impl LogReal {
    pub const ZERO: LogReal = LogReal { sign: 0, logmag: f64::NEG_INFINITY };
    pub const ONE: LogReal = LogReal { sign: 1, logmag: 0.0 };

    /// Positive value `exp(logmag)`.
    pub fn from_ln(logmag: f64) -> Self {
        if logmag == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogReal { sign: 1, logmag }
    }

    pub fn from_parts(sign: i8, logmag: f64) -> Self {
        if sign == 0 || logmag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogReal { sign: sign.signum(), logmag }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogReal { sign: if x > 0.0 { 1 } else { -1 }, logmag: x.abs().ln() }
        }
    }

    /// Native value; overflows to `±inf` / underflows to `0` outside the f64 range.
    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.logmag.exp(),
        }
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    /// Natural log of the magnitude (`-inf` for zero).
    pub fn logmag(self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.logmag
        }
    }

    pub fn log10(self) -> f64 {
        self.logmag() / std::f64::consts::LN_10
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogReal { sign: 1, logmag: self.logmag }
        }
    }

    /// `|self|^e` for a positive value.
    pub fn powf(self, e: f64) -> Self {
        if self.sign == 0 {
            return if e == 0.0 { Self::ONE } else { Self::ZERO };
        }
        LogReal { sign: 1, logmag: self.logmag * e }
    }

    pub fn recip(self) -> Self {
        LogReal { sign: self.sign, logmag: -self.logmag }
    }

    /// Relative difference `|a - b| / max(|a|, |b|)`, computed in the log domain.
    pub fn rel_diff(self, other: LogReal) -> f64 {
        if self.sign == 0 && other.sign == 0 {
            return 0.0;
        }
        if self.sign != other.sign {
            return if self.sign == 0 || other.sign == 0 { 1.0 } else { 2.0 };
        }
        let d = (self.logmag - other.logmag).abs();
        -(-d).exp_m1()
    }
}

impl PartialEq for LogReal {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for LogReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.logmag.partial_cmp(&other.logmag),
                _ => other.logmag.partial_cmp(&self.logmag),
            },
            ord => Some(ord),
        }
    }
}

/// `a * b`: signs multiply, logs add, zero absorbs.
pub fn log_mul(a: LogReal, b: LogReal) -> LogReal {
    if a.sign == 0 || b.sign == 0 {
        return LogReal::ZERO;
    }
    LogReal::from_parts(a.sign * b.sign, a.logmag + b.logmag)
}

/// `a + b` by the max-plus-log1p form. Symmetric in its arguments by
/// construction and exact on cancellation.
pub fn log_add(a: LogReal, b: LogReal) -> LogReal {
    if a.sign == 0 {
        return b;
    }
    if b.sign == 0 {
        return a;
    }
    // canonical order: larger magnitude first, ties broken by sign
    let (big, small) = match a.logmag.partial_cmp(&b.logmag) {
        Some(Ordering::Greater) => (a, b),
        Some(Ordering::Less) => (b, a),
        _ => {
            if a.sign == b.sign {
                return LogReal::from_parts(a.sign, a.logmag + std::f64::consts::LN_2);
            }
            return LogReal::ZERO;
        }
    };
    let d = (small.logmag - big.logmag).exp();
    if big.sign == small.sign {
        LogReal::from_parts(big.sign, big.logmag + d.ln_1p())
    } else {
        LogReal::from_parts(big.sign, big.logmag + (-d).ln_1p())
    }
}

/// Stable sum of a finite stream of log-domain terms.
pub fn log_sum<I: IntoIterator<Item = LogReal>>(terms: I) -> LogReal {
    let mut acc = LogSum::new();
    for t in terms {
        acc.push(t);
    }
    acc.value()
}

/// Running-max rescaled accumulator with Neumaier compensation.
#[derive(Clone, Copy, Debug)]
pub struct LogSum {
    scale: f64,
    sum: f64,
    comp: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        LogSum { scale: f64::NEG_INFINITY, sum: 0.0, comp: 0.0 }
    }

    pub fn push(&mut self, t: LogReal) {
        if t.sign == 0 {
            return;
        }
        if self.scale == f64::NEG_INFINITY {
            self.scale = t.logmag;
        } else if t.logmag > self.scale {
            let r = (self.scale - t.logmag).exp();
            self.sum *= r;
            self.comp *= r;
            self.scale = t.logmag;
        }
        let x = f64::from(t.sign) * (t.logmag - self.scale).exp();
        let s = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - s) + x;
        } else {
            self.comp += (x - s) + self.sum;
        }
        self.sum = s;
    }

    pub fn value(&self) -> LogReal {
        if self.scale == f64::NEG_INFINITY {
            return LogReal::ZERO;
        }
        let total = self.sum + self.comp;
        if total == 0.0 {
            return LogReal::ZERO;
        }
        LogReal::from_parts(if total > 0.0 { 1 } else { -1 }, self.scale + total.abs().ln())
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, rhs: LogReal) -> LogReal {
        log_mul(self, rhs)
    }
}

impl Div for LogReal {
    type Output = LogReal;
    fn div(self, rhs: LogReal) -> LogReal {
        log_mul(self, rhs.recip())
    }
}

impl Add for LogReal {
    type Output = LogReal;
    fn add(self, rhs: LogReal) -> LogReal {
        log_add(self, rhs)
    }
}

impl Neg for LogReal {
    type Output = LogReal;
    fn neg(self) -> LogReal {
        LogReal { sign: -self.sign, logmag: self.logmag }
    }
}

impl Sub for LogReal {
    type Output = LogReal;
    fn sub(self, rhs: LogReal) -> LogReal {
        log_add(self, -rhs)
    }
}

impl fmt::Display for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_f64();
        if v.is_finite() && (v == 0.0 || v.abs() >= 1e-300) {
            write!(f, "{v}")
        } else {
            write!(f, "{}exp({})", if self.sign < 0 { "-" } else { "" }, self.logmag)
        }
    }
}

/// Exact signed integer used for indices, horizons and anchor positions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BigIndex(BigInt);

impl BigIndex {
    pub fn zero() -> Self {
        BigIndex(BigInt::zero())
    }

    pub fn one() -> Self {
        BigIndex(BigInt::one())
    }

    pub fn from_big(b: BigInt) -> Self {
        BigIndex(b)
    }

    pub fn as_big(&self) -> &BigInt {
        &self.0
    }

    pub fn to_i64(&self) -> Option<i64> {
        self.0.to_i64()
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }

    /// Nearest f64 (may be infinite).
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(if self.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn bits(&self) -> u64 {
        self.0.bits()
    }

    pub fn abs(&self) -> Self {
        BigIndex(self.0.abs())
    }

    /// Natural log of `|self|` with ~53 significant bits (`-inf` for zero).
    pub fn ln(&self) -> f64 {
        let (mant, shift) = top_bits(&self.0);
        if mant == 0.0 {
            return f64::NEG_INFINITY;
        }
        mant.ln() + shift as f64 * std::f64::consts::LN_2
    }

    /// The value as a positive [`LogReal`]-compatible magnitude (sign kept).
    pub fn to_log_real(&self) -> LogReal {
        let s = match self.0.sign() {
            BigSign::Minus => -1,
            BigSign::NoSign => 0,
            BigSign::Plus => 1,
        };
        LogReal::from_parts(s, self.ln())
    }

    /// `a / b` as f64 without overflowing either operand.
    pub fn ratio(a: &BigIndex, b: &BigIndex) -> f64 {
        let shift = a.bits().max(b.bits()).saturating_sub(96);
        let x = (&a.0 >> shift).to_f64().unwrap_or(f64::NAN);
        let y = (&b.0 >> shift).to_f64().unwrap_or(f64::NAN);
        x / y
    }

    pub fn succ(&self) -> Self {
        BigIndex(&self.0 + 1)
    }

    pub fn pred(&self) -> Self {
        BigIndex(&self.0 - 1)
    }

    /// Exact division; `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &BigIndex) -> Option<BigIndex> {
        let (q, r) = self.0.div_rem(&d.0);
        r.is_zero().then_some(BigIndex(q))
    }

    pub fn div_floor(&self, d: &BigIndex) -> BigIndex {
        BigIndex(self.0.div_floor(&d.0))
    }

    /// Floor of the square root of a nonnegative value.
    pub fn isqrt(&self) -> BigIndex {
        BigIndex(self.0.sqrt())
    }
}

/// Mantissa (as f64) and binary exponent such that `|x| ≈ mant * 2^shift`.
fn top_bits(x: &BigInt) -> (f64, u64) {
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let m = (x.magnitude() >> shift).to_f64().unwrap_or(0.0);
    (m, shift)
}

macro_rules! from_prim {
    ($($t:ty),*) => {$(
        impl From<$t> for BigIndex {
            fn from(v: $t) -> Self { BigIndex(BigInt::from(v)) }
        }
    )*};
}
from_prim!(i32, i64, u32, u64, usize, i128, u128);

macro_rules! bin_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr<&BigIndex> for &BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: &BigIndex) -> BigIndex { BigIndex(&self.0 $op &rhs.0) }
        }
        impl $tr<BigIndex> for BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: BigIndex) -> BigIndex { BigIndex(self.0 $op rhs.0) }
        }
        impl $tr<BigIndex> for &BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: BigIndex) -> BigIndex { BigIndex(&self.0 $op rhs.0) }
        }
        impl $tr<&BigIndex> for BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: &BigIndex) -> BigIndex { BigIndex(self.0 $op &rhs.0) }
        }
        impl $tr<i64> for &BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: i64) -> BigIndex { BigIndex(&self.0 $op rhs) }
        }
        impl $tr<i64> for BigIndex {
            type Output = BigIndex;
            fn $m(self, rhs: i64) -> BigIndex { BigIndex(self.0 $op rhs) }
        }
    };
}
bin_op!(Add, add, +);
bin_op!(Sub, sub, -);
bin_op!(Mul, mul, *);

impl Neg for BigIndex {
    type Output = BigIndex;
    fn neg(self) -> BigIndex {
        BigIndex(-self.0)
    }
}

impl Neg for &BigIndex {
    type Output = BigIndex;
    fn neg(self) -> BigIndex {
        BigIndex(-&self.0)
    }
}

impl PartialEq<i64> for BigIndex {
    fn eq(&self, other: &i64) -> bool {
        self.0 == BigInt::from(*other)
    }
}

impl PartialOrd<i64> for BigIndex {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.0.partial_cmp(&BigInt::from(*other))
    }
}

impl fmt::Display for BigIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for BigIndex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<BigInt>()
            .map(BigIndex)
            .map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}")))
    }
}

impl Serialize for BigIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for BigIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
