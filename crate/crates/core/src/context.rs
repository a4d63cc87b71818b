//! Evaluation context: base `q`, default deformation `u`, arithmetic mode and
//! truncation policy.

use rug::ops::Pow;
use rug::{Float, Rational};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float { precision_bits: u32 },
}

/// Stopping rule for infinite series and products.
///
/// A series stops after `stall_window` consecutive terms below
/// `rel_tol` relative to the largest magnitude seen so far.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationPolicy {
    pub max_terms: usize,
    pub rel_tol: Rational,
    pub stall_window: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            max_terms: 500,
            rel_tol: Rational::from((1, rug::Integer::from(10).pow(30u32))),
            stall_window: 3,
        }
    }
}

impl TruncationPolicy {
    pub fn new(max_terms: usize, rel_tol: Rational, stall_window: usize) -> Result<Self> {
        let policy = TruncationPolicy {
            max_terms,
            rel_tol,
            stall_window,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms == 0 {
            return Err(Error::InvalidContext("max_terms must be at least 1".into()));
        }
        if self.stall_window == 0 {
            return Err(Error::InvalidContext("stall_window must be at least 1".into()));
        }
        if self.rel_tol <= 0 {
            return Err(Error::InvalidContext("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Bits of slack below the working precision under which a factor of the
/// form `1 - a q^k` is treated as an exact zero in float mode.
const ZERO_FACTOR_SLACK_BITS: u32 = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct QContext {
    q: Scalar,
    u: Scalar,
    mode: Mode,
    truncation: TruncationPolicy,
}

impl QContext {
    /// Exact rational context with `u = 1`.
    pub fn exact(q: Rational) -> Result<Self> {
        check_base(&q)?;
        Ok(QContext {
            q: Scalar::Exact(q),
            u: Scalar::Exact(Rational::from(1)),
            mode: Mode::Exact,
            truncation: TruncationPolicy::default(),
        })
    }

    /// Float context at `precision_bits`, `q` rounded to nearest.
    pub fn float(q: Rational, precision_bits: u32, truncation: TruncationPolicy) -> Result<Self> {
        check_base(&q)?;
        if precision_bits < 16 {
            return Err(Error::InvalidContext(format!(
                "precision {precision_bits} bits is too small"
            )));
        }
        truncation.validate()?;
        Ok(QContext {
            q: Scalar::Float(Float::with_val(precision_bits, &q)),
            u: Scalar::Float(Float::with_val(precision_bits, 1)),
            mode: Mode::Float { precision_bits },
            truncation,
        })
    }

    pub fn new(q: Rational, mode: Mode, truncation: TruncationPolicy) -> Result<Self> {
        match mode {
            Mode::Exact => Ok(QContext::exact(q)?.with_truncation(truncation)),
            Mode::Float { precision_bits } => QContext::float(q, precision_bits, truncation),
        }
    }

    pub fn with_u(mut self, u: &Rational) -> Self {
        self.u = self.lift(u);
        self
    }

    pub fn with_u_scalar(mut self, u: Scalar) -> Result<Self> {
        self.check(&u)?;
        self.u = u;
        Ok(self)
    }

    pub fn with_truncation(mut self, truncation: TruncationPolicy) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn q(&self) -> &Scalar {
        &self.q
    }

    pub fn u(&self) -> &Scalar {
        &self.u
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn truncation(&self) -> &TruncationPolicy {
        &self.truncation
    }

    pub fn is_exact(&self) -> bool {
        self.mode == Mode::Exact
    }

    pub fn precision(&self) -> Option<u32> {
        match self.mode {
            Mode::Exact => None,
            Mode::Float { precision_bits } => Some(precision_bits),
        }
    }

    /// Checks that `s` belongs to this context's mode and precision.
    pub fn check(&self, s: &Scalar) -> Result<()> {
        match (self.mode, s) {
            (Mode::Exact, Scalar::Exact(_)) => Ok(()),
            (Mode::Float { precision_bits }, Scalar::Float(f)) if f.prec() == precision_bits => {
                Ok(())
            }
            _ => Err(Error::ModeMismatch(format!(
                "value {s} does not belong to a {:?} context",
                self.mode
            ))),
        }
    }

    pub fn lift(&self, r: &Rational) -> Scalar {
        match self.mode {
            Mode::Exact => Scalar::Exact(r.clone()),
            Mode::Float { precision_bits } => Scalar::Float(Float::with_val(precision_bits, r)),
        }
    }

    pub fn int(&self, v: i64) -> Scalar {
        self.q.int_like(v)
    }

    pub fn ratio(&self, num: i64, den: i64) -> Scalar {
        self.lift(&Rational::from((num, den)))
    }

    pub fn zero(&self) -> Scalar {
        self.int(0)
    }

    pub fn one(&self) -> Scalar {
        self.int(1)
    }

    pub fn from_f64(&self, v: f64) -> Scalar {
        self.q.f64_like(v)
    }

    /// `q^e` for any integer `e`.
    pub fn q_pow(&self, e: i64) -> Scalar {
        self.q.pow_int(e).expect("q is nonzero")
    }

    /// Unit roundoff `2^(1-p)`; zero in exact mode.
    pub fn eps(&self) -> Scalar {
        match self.mode {
            Mode::Exact => self.zero(),
            Mode::Float { precision_bits } => {
                Scalar::Float(Float::with_val(precision_bits, 1) >> (precision_bits - 1))
            }
        }
    }

    /// `rel_tol` in this context's mode.
    pub fn rel_tol(&self) -> Scalar {
        self.lift(&self.truncation.rel_tol)
    }

    /// Whether a factor of order one should be read as an exact zero. Exact
    /// mode compares literally; float mode accepts anything within
    /// `2^-(p - 24)` of zero so that parameters like `q^-n` rounded to
    /// nearest still terminate a series.
    pub fn is_zero_factor(&self, factor: &Scalar) -> bool {
        match (self.mode, factor) {
            (Mode::Exact, s) => s.is_zero(),
            (Mode::Float { precision_bits }, Scalar::Float(f)) => {
                if f.is_zero() {
                    return true;
                }
                let threshold = -(precision_bits as i64 - ZERO_FACTOR_SLACK_BITS as i64);
                f.get_exp().map(|e| (e as i64) <= threshold).unwrap_or(true)
            }
            (Mode::Float { .. }, Scalar::Exact(r)) => *r == 0,
        }
    }

    /// Same context at a higher working precision. The tolerance shrinks by
    /// `2^-guard_bits` and the term budget grows in proportion, so that
    /// truncation noise stays below the new roundoff level. Exact contexts are
    /// returned unchanged.
    pub fn boosted(&self, guard_bits: u32) -> QContext {
        let Mode::Float { precision_bits } = self.mode else {
            return self.clone();
        };
        let working = precision_bits + guard_bits;
        let mut truncation = self.truncation.clone();
        truncation.rel_tol >>= guard_bits;
        let growth = (working as usize).div_ceil(precision_bits as usize);
        truncation.max_terms = truncation.max_terms.saturating_mul(2 * growth);
        QContext {
            q: self.q.with_precision(working),
            u: self.u.with_precision(working),
            mode: Mode::Float {
                precision_bits: working,
            },
            truncation,
        }
    }

    /// Rounds a value into this context's precision.
    pub fn round(&self, s: &Scalar) -> Scalar {
        match self.mode {
            Mode::Exact => s.clone(),
            Mode::Float { precision_bits } => s.with_precision(precision_bits),
        }
    }
}

fn check_base(q: &Rational) -> Result<()> {
    if *q == 0 || q.clone().abs() >= 1 {
        return Err(Error::InvalidContext(format!("need 0 < |q| < 1, got q = {q}")));
    }
    Ok(())
}
