//! The Jackson q-derivative `D_q f(x) = (f(x) - f(qx)) / x` on black-box
//! evaluators, and closed forms for its powers on q-shifted factorial
//! quotients.

mod closed_form;
mod handle;

pub use closed_form::{
    cf_double_ratio, cf_double_ratio_inf, cf_geometric, cf_inv_poch, cf_poch_ratio,
    cf_xn_over_poch, DoubleRatio,
};
pub use handle::FunctionHandle;
pub(crate) use closed_form::recip;

use crate::context::QContext;
use crate::error::{Error, Result};
use crate::qcore::qbinom;
use crate::scalar::{Approx, Scalar};

/// Extra ulps charged per evaluator result, for closed forms that report no
/// error bound of their own.
pub(crate) const EVAL_SLACK_ULPS: i64 = 64;

/// `D_q f(x)`.
pub fn dq_apply(f: &FunctionHandle, ctx: &QContext, x: &Scalar) -> Result<Scalar> {
    dq_iter(f, ctx, 1, x)
}

/// `D_q^k f(x)` by repeated differencing over the lattice `x q^j`,
/// `0 <= j <= k`. Each lattice point is evaluated once.
pub fn dq_iter(f: &FunctionHandle, ctx: &QContext, k: usize, x: &Scalar) -> Result<Scalar> {
    dq_iter_approx(f, ctx, k, x).map(|a| a.value)
}

/// [`dq_iter`] with an absolute error bound.
///
/// In float mode the differences run at a raised working precision so that
/// the cancellation in a k-th difference does not eat into the caller's
/// precision; the returned value is rounded back to `ctx`. The bound covers
/// the evaluator's own bounds, rounding in the recursion and the final
/// rounding.
pub fn dq_iter_approx(f: &FunctionHandle, ctx: &QContext, k: usize, x: &Scalar) -> Result<Approx> {
    ctx.check(x)?;
    if k == 0 {
        return f.eval(x, ctx);
    }
    if x.is_zero() {
        return Err(Error::ZeroEvaluationPoint);
    }
    let Some(prec) = ctx.precision() else {
        let table = Lattice::evaluate(f, ctx, x, k)?;
        return Ok(Approx::exact(table.derivative(k).value));
    };
    let mut guard = guard_bits(ctx, k, x);
    let mut attempts = 0;
    loop {
        let work = ctx.boosted(guard);
        let xw = work.round(x);
        let table = Lattice::evaluate(f, &work, &xw, k)?;
        let d = table.derivative(k);
        let slack = work.int(2 * (k as i64 + 1) + EVAL_SLACK_ULPS);
        let rounding = &(&slack * &work.eps()) * &d.abs;
        // Retry once or twice if cancellation was worse than the estimate.
        let deficit = rounding.log2_abs() - d.value.log2_abs() + prec as f64 + 8.0;
        if deficit > 0.0 && !d.value.is_zero() && attempts < 2 {
            guard += deficit.ceil() as u32 + 8;
            attempts += 1;
            continue;
        }
        let value = ctx.round(&d.value);
        let bound = &ctx.round(&(&d.bound + &rounding)) + &(&value.abs() * &ctx.eps());
        return Ok(Approx::new(value, bound));
    }
}

/// Bits lost to cancellation in a k-th q-difference at `x`, plus headroom.
pub(crate) fn guard_bits(ctx: &QContext, k: usize, x: &Scalar) -> u32 {
    if ctx.is_exact() {
        return 0;
    }
    let lx = (-x.log2_abs()).max(0.0);
    let lq = -ctx.q().log2_abs();
    let k = k as f64;
    (k + k * lx + k * (k - 1.0) / 2.0 * lq + 32.0).ceil() as u32
}

/// One level of the difference table: values `D^m f(x_j)`, their error
/// bounds, and the same recursion run on absolute values.
pub(crate) struct LatticeEntry {
    pub value: Scalar,
    pub bound: Scalar,
    pub abs: Scalar,
}

pub(crate) struct Lattice {
    points: Vec<Scalar>,
    base: Vec<LatticeEntry>,
}

impl Lattice {
    fn evaluate(f: &FunctionHandle, ctx: &QContext, x: &Scalar, k: usize) -> Result<Lattice> {
        let mut points = Vec::with_capacity(k + 1);
        let mut base = Vec::with_capacity(k + 1);
        let mut xj = x.clone();
        for _ in 0..=k {
            let v = f.eval(&xj, ctx)?;
            base.push(LatticeEntry {
                abs: v.value.abs(),
                value: v.value,
                bound: v.bound,
            });
            points.push(xj.clone());
            xj = &xj * ctx.q();
        }
        Ok(Lattice { points, base })
    }

    fn derivative(&self, k: usize) -> LatticeEntry {
        let mut level: Vec<LatticeEntry> = self
            .base
            .iter()
            .map(|e| LatticeEntry {
                value: e.value.clone(),
                bound: e.bound.clone(),
                abs: e.abs.clone(),
            })
            .collect();
        for m in 0..k {
            level = (0..k - m)
                .map(|j| difference(&level[j], &level[j + 1], &self.points[j]))
                .collect();
        }
        level.swap_remove(0)
    }
}

/// `(g(x_j) - g(x_{j+1})) / x_j` on a table entry.
pub(crate) fn difference(near: &LatticeEntry, far: &LatticeEntry, x: &Scalar) -> LatticeEntry {
    let ax = x.abs();
    LatticeEntry {
        value: &(&near.value - &far.value) / x,
        bound: &(&near.bound + &far.bound) / &ax,
        abs: &(&near.abs + &far.abs) / &ax,
    }
}

/// Right-hand side of the q-Leibniz rule,
/// `sum_k q^(k(k-n)) [n,k] D^k f(x) D^(n-k) g(q^k x)` where the second
/// factor differentiates the dilated function `t -> g(q^k t)`.
pub fn leibniz_rhs(
    f: &FunctionHandle,
    g: &FunctionHandle,
    ctx: &QContext,
    n: usize,
    x: &Scalar,
) -> Result<Scalar> {
    leibniz_rhs_approx(f, g, ctx, n, x).map(|a| a.value)
}

pub fn leibniz_rhs_approx(
    f: &FunctionHandle,
    g: &FunctionHandle,
    ctx: &QContext,
    n: usize,
    x: &Scalar,
) -> Result<Approx> {
    if n > 0 && x.is_zero() {
        return Err(Error::ZeroEvaluationPoint);
    }
    let mut total = Approx::exact(ctx.zero());
    for k in 0..=n {
        let coeff = &ctx.q_pow(k as i64 * (k as i64 - n as i64)) * &qbinom(n, k as i64, ctx);
        let df = dq_iter_approx(f, ctx, k, x)?;
        let dg = dq_iter_approx(&g.dilated(k as i64), ctx, n - k, x)?;
        total = total.add(&df.mul(&dg).scale(&coeff));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::Rational;

    fn ex(p: i64, d: i64) -> QContext {
        QContext::exact(Rational::from((p, d))).unwrap()
    }

    fn power(n: i32) -> FunctionHandle {
        FunctionHandle::from_fn(move |x, _| Ok(x.pow_int(n as i64)?))
    }

    #[test]
    fn constant_has_zero_derivative() {
        let ctx = ex(1, 2);
        let f = FunctionHandle::from_fn(|x, _| Ok(x.int_like(7)));
        assert!(dq_apply(&f, &ctx, &ctx.ratio(2, 3)).unwrap().is_zero());
    }

    #[test]
    fn square_at_one() {
        let ctx = ex(1, 2);
        assert_eq!(dq_apply(&power(2), &ctx, &ctx.one()).unwrap(), ctx.ratio(3, 4));
    }

    #[test]
    fn linear_gives_one_minus_q() {
        let ctx = ex(2, 5);
        for x in [ctx.ratio(1, 7), ctx.int(-3)] {
            assert_eq!(dq_apply(&power(1), &ctx, &x).unwrap(), ctx.ratio(3, 5));
        }
    }

    #[test]
    fn zero_point_is_rejected() {
        let ctx = ex(1, 2);
        assert_eq!(
            dq_iter(&power(2), &ctx, 2, &ctx.zero()),
            Err(Error::ZeroEvaluationPoint)
        );
        assert!(dq_iter(&power(2), &ctx, 0, &ctx.zero()).unwrap().is_zero());
    }

    #[test]
    fn lattice_costs_k_plus_one_calls() {
        let ctx = ex(1, 3);
        for k in 0..6 {
            let f = power(5);
            dq_iter(&f, &ctx, k, &ctx.ratio(2, 3)).unwrap();
            assert_eq!(f.calls(), k + 1);
            dq_iter(&f, &ctx, k, &ctx.ratio(2, 3)).unwrap();
            assert_eq!(f.calls(), k + 1);
        }
    }

    #[test]
    fn leibniz_base_cases() {
        let ctx = ex(1, 2);
        let x = ctx.ratio(3, 7);
        let (f, g) = (power(2), power(3));
        assert_eq!(
            leibniz_rhs(&f, &g, &ctx, 0, &x).unwrap(),
            &x.pow_int(2).unwrap() * &x.pow_int(3).unwrap()
        );
        let id = power(1);
        assert_eq!(leibniz_rhs(&id, &id, &ctx, 1, &ctx.one()).unwrap(), ctx.ratio(3, 4));
    }

    #[test]
    fn float_mode_matches_exact_mode() {
        let exact = ex(1, 2);
        let float = QContext::float(Rational::from((1, 2)), 128, Default::default()).unwrap();
        let f = FunctionHandle::from_fn(|x, ctx| {
            let p = crate::qcore::qpoch(&(x * &ctx.ratio(1, 3)), ctx, 4);
            Ok(&ctx.one() / &p)
        });
        for k in 0..5 {
            let e = dq_iter(&f, &exact, k, &exact.ratio(1, 2)).unwrap();
            let a = dq_iter_approx(&f, &float, k, &float.ratio(1, 2)).unwrap();
            let diff = (&a.value - &float.lift(e.as_rational().unwrap())).abs();
            assert!(diff.try_cmp(&a.bound).unwrap().is_le());
            assert!(a.bound.to_f64() < 1e-30 * a.value.to_f64().abs());
        }
    }
}
