//! Mode-tagged scalar arithmetic.
//!
//! A [`Scalar`] is either an exact rational in canonical form or a binary
//! floating value carrying its precision. Binary operations require both
//! operands to be in the same mode and, for floats, at the same precision;
//! there is no implicit coercion between the two.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(Rational),
    Float(Float),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    PowInt(i64),
}

impl Scalar {
    pub fn exact(value: impl Into<Rational>) -> Self {
        Scalar::Exact(value.into())
    }

    pub fn ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(Scalar::Exact(Rational::from((num, den))))
    }

    pub fn float(value: Float) -> Self {
        Scalar::Float(value)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    /// Precision in bits for float values, `None` for exact ones.
    pub fn precision(&self) -> Option<u32> {
        match self {
            Scalar::Exact(_) => None,
            Scalar::Float(f) => Some(f.prec()),
        }
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Float(_) => None,
        }
    }

    pub fn as_float(&self) -> Option<&Float> {
        match self {
            Scalar::Exact(_) => None,
            Scalar::Float(f) => Some(f),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => *r == 0,
            Scalar::Float(f) => f.is_zero(),
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Exact(r) => *r == 1,
            Scalar::Float(f) => *f == 1,
        }
    }

    /// Zero in the same mode (and precision) as `self`.
    pub fn zero_like(&self) -> Scalar {
        self.int_like(0)
    }

    pub fn one_like(&self) -> Scalar {
        self.int_like(1)
    }

    pub fn int_like(&self, v: i64) -> Scalar {
        match self {
            Scalar::Exact(_) => Scalar::Exact(Rational::from(v)),
            Scalar::Float(f) => Scalar::Float(Float::with_val(f.prec(), v)),
        }
    }

    /// Converts a rational into the mode of `self`, rounding to nearest in
    /// float mode.
    pub fn rational_like(&self, r: &Rational) -> Scalar {
        match self {
            Scalar::Exact(_) => Scalar::Exact(r.clone()),
            Scalar::Float(f) => Scalar::Float(Float::with_val(f.prec(), r)),
        }
    }

    /// Converts an `f64` into the mode of `self`. Exact mode receives the
    /// exact binary value of `v`.
    pub fn f64_like(&self, v: f64) -> Scalar {
        match self {
            Scalar::Exact(_) => Scalar::Exact(Rational::from_f64(v).unwrap_or_default()),
            Scalar::Float(f) => Scalar::Float(Float::with_val(f.prec(), v)),
        }
    }

    pub fn signum(&self) -> i32 {
        match self {
            Scalar::Exact(r) => r.cmp0() as i32,
            Scalar::Float(f) => f.cmp0().map(|o| o as i32).unwrap_or(0),
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.clone().abs()),
            Scalar::Float(f) => Scalar::Float(f.clone().abs()),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => r.to_f64(),
            Scalar::Float(f) => f.to_f64(),
        }
    }

    /// Approximate base-2 logarithm of `|self|`, valid far outside the `f64`
    /// exponent range. Returns `-inf` for zero.
    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let f = match self {
            Scalar::Exact(r) => Float::with_val(64, r),
            Scalar::Float(f) => f.clone(),
        };
        let (mant, exp) = f.to_f64_exp();
        mant.abs().log2() + exp as f64
    }

    fn check_mode(&self, other: &Scalar) -> Result<()> {
        match (self, other) {
            (Scalar::Exact(_), Scalar::Exact(_)) => Ok(()),
            (Scalar::Float(a), Scalar::Float(b)) if a.prec() == b.prec() => Ok(()),
            (Scalar::Float(a), Scalar::Float(b)) => Err(Error::ModeMismatch(format!(
                "float precisions {} and {} differ",
                a.prec(),
                b.prec()
            ))),
            _ => Err(Error::ModeMismatch("exact and float operands".into())),
        }
    }

    /// Compares absolute values. Both operands must share a mode.
    pub fn cmp_abs(&self, other: &Scalar) -> Result<Ordering> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Ok(a.cmp_abs(b)),
            (Scalar::Float(a), Scalar::Float(b)) => a
                .cmp_abs(b)
                .ok_or_else(|| Error::DomainError("NaN comparison".into())),
            _ => Err(Error::ModeMismatch("exact and float operands".into())),
        }
    }

    /// Three-way comparison of values in the same mode.
    pub fn try_cmp(&self, other: &Scalar) -> Result<Ordering> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Ok(a.cmp(b)),
            (Scalar::Float(a), Scalar::Float(b)) => a
                .partial_cmp(b)
                .ok_or_else(|| Error::DomainError("NaN comparison".into())),
            _ => Err(Error::ModeMismatch("exact and float operands".into())),
        }
    }

    /// The single entry point for checked arithmetic. `PowInt` ignores `rhs`
    /// beyond the mode check.
    pub fn arith(&self, op: ArithOp, rhs: &Scalar) -> Result<Scalar> {
        self.check_mode(rhs)?;
        match op {
            ArithOp::Add => Ok(self.binary(rhs, |a, b| Rational::from(a + b), |p, a, b| {
                Float::with_val(p, a + b)
            })),
            ArithOp::Sub => Ok(self.binary(rhs, |a, b| Rational::from(a - b), |p, a, b| {
                Float::with_val(p, a - b)
            })),
            ArithOp::Mul => Ok(self.binary(rhs, |a, b| Rational::from(a * b), |p, a, b| {
                Float::with_val(p, a * b)
            })),
            ArithOp::Div => {
                if rhs.is_zero() {
                    return Err(Error::DivisionByZero);
                }
                Ok(self.binary(rhs, |a, b| Rational::from(a / b), |p, a, b| {
                    Float::with_val(p, a / b)
                }))
            }
            ArithOp::PowInt(e) => self.pow_int(e),
        }
    }

    fn binary(
        &self,
        rhs: &Scalar,
        exact: impl Fn(&Rational, &Rational) -> Rational,
        float: impl Fn(u32, &Float, &Float) -> Float,
    ) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(exact(a, b)),
            (Scalar::Float(a), Scalar::Float(b)) => Scalar::Float(float(a.prec(), a, b)),
            _ => unreachable!("mode checked by caller"),
        }
    }

    pub fn try_add(&self, rhs: &Scalar) -> Result<Scalar> {
        self.arith(ArithOp::Add, rhs)
    }

    pub fn try_sub(&self, rhs: &Scalar) -> Result<Scalar> {
        self.arith(ArithOp::Sub, rhs)
    }

    pub fn try_mul(&self, rhs: &Scalar) -> Result<Scalar> {
        self.arith(ArithOp::Mul, rhs)
    }

    pub fn try_div(&self, rhs: &Scalar) -> Result<Scalar> {
        self.arith(ArithOp::Div, rhs)
    }

    /// Integer power. Negative exponents of zero are a division by zero.
    pub fn pow_int(&self, e: i64) -> Result<Scalar> {
        if e < 0 && self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let e32 = i32::try_from(e)
            .map_err(|_| Error::DomainError(format!("exponent {e} out of range")))?;
        Ok(match self {
            Scalar::Exact(r) => Scalar::Exact(Rational::from(r.pow(e32))),
            Scalar::Float(f) => Scalar::Float(Float::with_val(f.prec(), f.pow(e32))),
        })
    }

    /// Rounds a float to `prec` bits; exact values pass through.
    pub fn with_precision(&self, prec: u32) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.clone()),
            Scalar::Float(f) => Scalar::Float(Float::with_val(prec, f)),
        }
    }

    /// `exp(self) - 1`, float mode only.
    pub fn exp_m1(&self) -> Result<Scalar> {
        match self {
            Scalar::Exact(_) => Err(Error::ExactModeUnsupported("exp_m1".into())),
            Scalar::Float(f) => Ok(Scalar::Float(Float::with_val(f.prec(), f.exp_m1_ref()))),
        }
    }

    /// `ln(1 + self)`, float mode only.
    pub fn ln_1p(&self) -> Result<Scalar> {
        match self {
            Scalar::Exact(_) => Err(Error::ExactModeUnsupported("ln_1p".into())),
            Scalar::Float(f) => Ok(Scalar::Float(Float::with_val(f.prec(), f.ln_1p_ref()))),
        }
    }

    /// Larger of two absolute values, as a nonnegative scalar.
    pub fn max_abs(&self, other: &Scalar) -> Scalar {
        match self.cmp_abs(other) {
            Ok(Ordering::Less) => other.abs(),
            _ => self.abs(),
        }
    }

    /// Canonical text. Rationals print as `p/q` (or `p` when integral);
    /// floats print in scientific notation with enough digits to round-trip.
    pub fn to_canonical_string(&self) -> String {
        match self {
            Scalar::Exact(r) => r.to_string(),
            Scalar::Float(f) => {
                if f.is_zero() {
                    return "0".into();
                }
                let digits = (f.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1;
                f.to_string_radix(10, Some(digits))
            }
        }
    }

    /// Parses a rational literal: `p`, `p/q`, or a decimal in plain or
    /// scientific notation (`0.25`, `-1.5e-3`). Decimals are read exactly.
    pub fn parse_rational(text: &str) -> Result<Rational> {
        let s = text.trim();
        if s.is_empty() {
            return Err(Error::Parse("empty literal".into()));
        }
        if let Some((num, den)) = s.split_once('/') {
            let n = parse_integer(num)?;
            let d = parse_integer(den)?;
            if d == 0 {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            return Ok(Rational::from((n, d)));
        }
        parse_decimal(s)
    }
}

fn parse_integer(s: &str) -> Result<Integer> {
    let t = s.trim();
    let t = t.strip_prefix('+').unwrap_or(t);
    if t.is_empty() || !t.trim_start_matches('-').chars().all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("bad integer {s:?}")));
    }
    t.parse::<Integer>()
        .map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}")))
}

fn parse_decimal(s: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("bad number literal {s:?}"));
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..].trim_start_matches('+').parse().map_err(|_| bad())?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (negative, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from(digits.parse::<Integer>().map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i64;
    let ten = Rational::from(10);
    let scale32 = i32::try_from(scale).map_err(|_| bad())?;
    value *= Rational::from((&ten).pow(scale32));
    if negative {
        value = -value;
    }
    Ok(value)
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

impl From<Rational> for Scalar {
    fn from(r: Rational) -> Self {
        Scalar::Exact(r)
    }
}

impl From<Float> for Scalar {
    fn from(f: Float) -> Self {
        Scalar::Float(f)
    }
}

// Operator sugar for formula code. Operands are produced by one context, so a
// mode mismatch here is a programming error and panics; divisions that can
// legitimately hit zero go through `try_div`.
macro_rules! impl_op {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                self.arith($op, rhs)
                    .unwrap_or_else(|e| panic!("scalar {}: {e}", stringify!($method)))
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self.$method(&rhs)
            }
        }
    };
}

impl_op!(Add, add, ArithOp::Add);
impl_op!(Sub, sub, ArithOp::Sub);
impl_op!(Mul, mul, ArithOp::Mul);
impl_op!(Div, div, ArithOp::Div);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(Rational::from(-r)),
            Scalar::Float(f) => Scalar::Float(Float::with_val(f.prec(), -f)),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

/// A value together with an absolute error bound. Exact computations carry a
/// zero bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Approx {
    pub value: Scalar,
    pub bound: Scalar,
}

impl Approx {
    pub fn exact(value: Scalar) -> Self {
        let bound = value.zero_like();
        Approx { value, bound }
    }

    pub fn new(value: Scalar, bound: Scalar) -> Self {
        Approx { value, bound }
    }

    pub fn add(&self, other: &Approx) -> Approx {
        Approx {
            value: &self.value + &other.value,
            bound: &self.bound + &other.bound,
        }
    }

    pub fn sub(&self, other: &Approx) -> Approx {
        Approx {
            value: &self.value - &other.value,
            bound: &self.bound + &other.bound,
        }
    }

    pub fn mul(&self, other: &Approx) -> Approx {
        let bound = &(&self.value.abs() * &other.bound)
            + &(&other.value.abs() * &self.bound)
            + &self.bound * &other.bound;
        Approx {
            value: &self.value * &other.value,
            bound,
        }
    }

    /// Multiplies by an exactly known factor.
    pub fn scale(&self, factor: &Scalar) -> Approx {
        Approx {
            value: &self.value * factor,
            bound: &self.bound * &factor.abs(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> Scalar {
        Scalar::ratio(p, q).unwrap()
    }

    #[test]
    fn rational_addition() {
        assert_eq!(r(1, 2).try_add(&r(1, 3)).unwrap(), r(5, 6));
    }

    #[test]
    fn canonical_form_on_construction() {
        assert_eq!(r(2, 4).to_string(), "1/2");
        assert_eq!(r(-6, -4).to_string(), "3/2");
        assert_eq!(r(4, -2).to_string(), "-2");
    }

    #[test]
    fn inverse_via_pow_int() {
        assert_eq!(r(1, 2).pow_int(-1).unwrap(), r(2, 1));
        assert_eq!(r(0, 1).pow_int(-1), Err(Error::DivisionByZero));
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert_eq!(r(1, 2).try_div(&r(0, 1)), Err(Error::DivisionByZero));
    }

    #[test]
    fn mixing_modes_is_rejected() {
        let f = Scalar::Float(Float::with_val(64, 0.5));
        assert!(matches!(r(1, 2).try_add(&f), Err(Error::ModeMismatch(_))));
        let g = Scalar::Float(Float::with_val(128, 0.5));
        assert!(matches!(f.try_mul(&g), Err(Error::ModeMismatch(_))));
    }

    #[test]
    fn parse_literals() {
        assert_eq!(Scalar::parse_rational("-3/2").unwrap(), Rational::from((-3, 2)));
        assert_eq!(Scalar::parse_rational("+7").unwrap(), Rational::from(7));
        assert_eq!(Scalar::parse_rational("0.25").unwrap(), Rational::from((1, 4)));
        assert_eq!(
            Scalar::parse_rational("1e-25").unwrap(),
            Rational::from((1, Integer::from(10).pow(25u32)))
        );
        assert_eq!(Scalar::parse_rational("-1.5E+2").unwrap(), Rational::from(-150));
        assert!(Scalar::parse_rational("1/0").is_err());
        assert!(Scalar::parse_rational("abc").is_err());
        assert!(Scalar::parse_rational("1.2.3").is_err());
    }

    #[test]
    fn log2_abs_handles_extreme_exponents() {
        let tiny = r(1, 2).pow_int(3000).unwrap();
        assert!((tiny.log2_abs() + 3000.0).abs() < 1e-9);
    }

    #[test]
    fn approx_product_bound() {
        let a = Approx::new(r(2, 1), r(1, 10));
        let b = Approx::new(r(3, 1), r(1, 100));
        let p = a.mul(&b);
        assert_eq!(p.value, r(6, 1));
        // 2*0.01 + 3*0.1 + 0.001
        assert_eq!(p.bound, r(321, 1000));
    }
}
