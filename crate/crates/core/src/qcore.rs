//! q-shifted factorials and q-binomial coefficients.
//!
//! `(a;q)_n = (1-a)(1-aq)...(1-aq^(n-1))`, its infinite-product limit with
//! an explicit multiplicative tail bound, multi-parameter products, and the
//! Gaussian binomial.

use rug::Rational;

use crate::context::QContext;
use crate::error::{Error, Result};
use crate::scalar::{Approx, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct PochResult {
    pub value: Scalar,
    /// Absolute bound on `|(a;q)_inf - value|`; present only for truncated
    /// infinite products.
    pub tail_bound: Option<Scalar>,
    pub factors_used: usize,
}

impl PochResult {
    fn finite(value: Scalar, factors_used: usize) -> Self {
        PochResult {
            value,
            tail_bound: None,
            factors_used,
        }
    }

    /// Tail bound relative to `|value|` (zero for finite products or a zero
    /// value).
    fn relative_bound(&self) -> Scalar {
        match &self.tail_bound {
            Some(t) if !self.value.is_zero() => t / &self.value.abs(),
            _ => self.value.zero_like(),
        }
    }

    pub fn into_approx(self) -> Approx {
        let bound = self.tail_bound.unwrap_or_else(|| self.value.zero_like());
        Approx::new(self.value, bound)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PochOrder {
    Finite(usize),
    Infinite,
}

/// `(a;q)_n`. A factor that vanishes (exactly, or to working precision in
/// float mode) makes the whole product an exact zero.
pub fn qpoch(a: &Scalar, ctx: &QContext, n: usize) -> Scalar {
    let mut value = ctx.one();
    let mut aqk = a.clone();
    for _ in 0..n {
        let factor = &ctx.one() - &aqk;
        if ctx.is_zero_factor(&factor) {
            return ctx.zero();
        }
        value = &value * &factor;
        aqk = &aqk * ctx.q();
    }
    value
}

/// `(a;q)_n` for a signed length; negative lengths use
/// `(a;q)_{-m} = 1/(aq^{-m};q)_m`.
pub fn qpoch_signed(a: &Scalar, ctx: &QContext, n: i64) -> Result<Scalar> {
    if n >= 0 {
        return Ok(qpoch(a, ctx, n as usize));
    }
    let m = n.unsigned_abs() as usize;
    let shifted = a * &ctx.q_pow(n);
    let den = qpoch(&shifted, ctx, m);
    ctx.one()
        .try_div(&den)
        .map_err(|_| Error::pole(format!("({shifted};q)_{m}")))
}

/// `(a;q)_inf`, float mode only.
///
/// Stops at the smallest `N` with `|a| |q|^N / (1-|q|) < ln(1 + rel_tol)`;
/// the neglected tail then multiplies the product by a factor within
/// `exp(|a| |q|^N / (1-|q|)) - 1` of one. A vanishing factor (`a = q^-m`)
/// short-circuits to an exact zero.
pub fn qpoch_inf(a: &Scalar, ctx: &QContext) -> Result<PochResult> {
    if ctx.is_exact() {
        return Err(Error::ExactModeUnsupported(
            "(a;q)_inf is irrational in general".into(),
        ));
    }
    ctx.check(a)?;
    if a.is_zero() {
        return Ok(PochResult {
            value: ctx.one(),
            tail_bound: Some(ctx.zero()),
            factors_used: 0,
        });
    }
    let abs_q = ctx.q().abs();
    let threshold = ctx.rel_tol().ln_1p()?;
    // t_N = |a| |q|^N / (1 - |q|)
    let mut tail_sum = &a.abs() / &(&ctx.one() - &abs_q);
    let mut value = ctx.one();
    let mut aqk = a.clone();
    let mut n = 0usize;
    while tail_sum.try_cmp(&threshold)?.is_ge() {
        if n >= ctx.truncation().max_terms {
            return Err(Error::MaxTermsExceeded {
                max_terms: ctx.truncation().max_terms,
            });
        }
        let factor = &ctx.one() - &aqk;
        if ctx.is_zero_factor(&factor) {
            return Ok(PochResult {
                value: ctx.zero(),
                tail_bound: Some(ctx.zero()),
                factors_used: n + 1,
            });
        }
        value = &value * &factor;
        aqk = &aqk * ctx.q();
        tail_sum = &tail_sum * &abs_q;
        n += 1;
    }
    let tail_bound = &value.abs() * &tail_sum.exp_m1()?;
    Ok(PochResult {
        value,
        tail_bound: Some(tail_bound),
        factors_used: n,
    })
}

/// `(a_1, ..., a_m; q)_n`, the product of the individual symbols. Relative
/// tail bounds of infinite factors combine as `prod(1 + r_i) - 1`.
pub fn qpoch_multi(params: &[Scalar], ctx: &QContext, order: PochOrder) -> Result<PochResult> {
    let mut value = ctx.one();
    let mut growth = ctx.one();
    let mut factors_used = 0;
    for a in params {
        let part = match order {
            PochOrder::Finite(n) => PochResult::finite(qpoch(a, ctx, n), n),
            PochOrder::Infinite => qpoch_inf(a, ctx)?,
        };
        factors_used += part.factors_used;
        if part.value.is_zero() {
            return Ok(PochResult {
                value: ctx.zero(),
                tail_bound: part.tail_bound.map(|_| ctx.zero()),
                factors_used,
            });
        }
        growth = &growth * &(&ctx.one() + &part.relative_bound());
        value = &value * &part.value;
    }
    let tail_bound = match order {
        PochOrder::Finite(_) => None,
        PochOrder::Infinite => Some(&value.abs() * &(&growth - &ctx.one())),
    };
    Ok(PochResult {
        value,
        tail_bound,
        factors_used,
    })
}

/// Gaussian binomial `[n, k]_q`; zero outside `0 <= k <= n`.
pub fn qbinom(n: usize, k: i64, ctx: &QContext) -> Scalar {
    if k < 0 || k as usize > n {
        return ctx.zero();
    }
    let k = k as usize;
    // Multiplicative form keeps the intermediate products small.
    let mut value = ctx.one();
    let mut qpow_top = ctx.q_pow((n - k + 1) as i64);
    let mut qpow_bot = ctx.q().clone();
    for _ in 0..k {
        let num = &ctx.one() - &qpow_top;
        let den = &ctx.one() - &qpow_bot;
        value = &(&value * &num) / &den;
        qpow_top = &qpow_top * ctx.q();
        qpow_bot = &qpow_bot * ctx.q();
    }
    value
}

/// `(q;q)_m`.
pub fn qfact(m: usize, ctx: &QContext) -> Scalar {
    qpoch(ctx.q(), ctx, m)
}

/// `1/(q;q)_m` with the convention that negative `m` gives zero, which is
/// how finite sums in the closed forms drop out-of-range terms.
pub fn inv_qfact(m: i64, ctx: &QContext) -> Scalar {
    if m < 0 {
        return ctx.zero();
    }
    &ctx.one() / &qfact(m as usize, ctx)
}

/// `C(n, 2)` for any integer `n`.
pub fn binom2(n: i64) -> i64 {
    n * (n - 1) / 2
}

/// Ratio of infinite products `prod (num_i;q)_inf / prod (den_j;q)_inf`.
///
/// Float mode multiplies truncated products and propagates their tail
/// bounds. Exact mode pairs every numerator with a denominator that differs
/// by an integer power of `q`, turning each pair into a finite product
/// `(x;q)_inf / (x q^m;q)_inf = (x;q)_m`; any unpaired parameter is an
/// `ExactModeUnsupported` error.
pub fn inf_ratio(nums: &[Scalar], dens: &[Scalar], ctx: &QContext) -> Result<Approx> {
    if ctx.is_exact() {
        return exact_inf_ratio(nums, dens, ctx);
    }
    let top = qpoch_multi(nums, ctx, PochOrder::Infinite)?;
    let bottom = qpoch_multi(dens, ctx, PochOrder::Infinite)?;
    if bottom.value.is_zero() {
        return Err(Error::pole("infinite product in denominator vanishes"));
    }
    let value = &top.value / &bottom.value;
    let rt = top.relative_bound();
    let rb = bottom.relative_bound();
    if rb.to_f64() >= 0.5 {
        return Err(Error::MaxTermsExceeded {
            max_terms: ctx.truncation().max_terms,
        });
    }
    // |(1+e_t)/(1+e_b) - 1| <= (r_t + r_b) / (1 - r_b)
    let rel = &(&rt + &rb) / &(&ctx.one() - &rb);
    let bound = &value.abs() * &rel;
    Ok(Approx::new(value, bound))
}

fn exact_inf_ratio(nums: &[Scalar], dens: &[Scalar], ctx: &QContext) -> Result<Approx> {
    let q = ctx.q().as_rational().expect("exact context").clone();
    let max_shift = ctx.truncation().max_terms;
    let nonzero = |v: &[Scalar]| -> Vec<Rational> {
        v.iter()
            .filter(|s| !s.is_zero())
            .map(|s| s.as_rational().expect("exact context").clone())
            .collect()
    };
    let nums = nonzero(nums);
    let mut dens = nonzero(dens);
    let mut value = ctx.one();
    for x in nums {
        let found = dens
            .iter()
            .enumerate()
            .find_map(|(j, y)| shift_between(&x, y, &q, max_shift).map(|m| (j, m)));
        let Some((j, m)) = found else {
            return Err(Error::ExactModeUnsupported(format!(
                "({x};q)_inf has no partner in the denominator"
            )));
        };
        let y = dens.swap_remove(j);
        if m >= 0 {
            value = &value * &qpoch(&Scalar::Exact(x), ctx, m as usize);
        } else {
            let den = qpoch(&Scalar::Exact(y.clone()), ctx, m.unsigned_abs() as usize);
            value = value
                .try_div(&den)
                .map_err(|_| Error::pole(format!("({y};q)_inf in denominator vanishes")))?;
        }
    }
    if let Some(y) = dens.first() {
        return Err(Error::ExactModeUnsupported(format!(
            "({y};q)_inf has no partner in the numerator"
        )));
    }
    Ok(Approx::exact(value))
}

/// `m` with `y = x q^m`, searching `|m| <= max_shift`.
fn shift_between(x: &Rational, y: &Rational, q: &Rational, max_shift: usize) -> Option<i64> {
    let mut xs = x.clone();
    let mut ys = y.clone();
    for m in 0..=max_shift as i64 {
        if xs == *y {
            return Some(m);
        }
        if ys == *x {
            return Some(-m);
        }
        xs *= q;
        ys *= q;
    }
    None
}
