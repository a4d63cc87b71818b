//! Closed forms for `D_q^k` of quotients of q-shifted factorials in `x`.
//!
//! Every denominator is checked before use; a vanishing one is reported as
//! a pole naming the factor. Sums that would need `1/(q;q)_m` with `m < 0`
//! drop those terms.

use crate::context::QContext;
use crate::error::{Error, Result};
use crate::qcore::{binom2, inf_ratio, inv_qfact, qbinom, qfact, qpoch};
use crate::scalar::{Approx, Scalar};

fn require_nonzero_x(x: &Scalar) -> Result<()> {
    if x.is_zero() {
        return Err(Error::ZeroEvaluationPoint);
    }
    Ok(())
}

pub(crate) fn recip(value: &Scalar, label: impl FnOnce() -> String) -> Result<Scalar> {
    if value.is_zero() {
        return Err(Error::pole(label()));
    }
    Ok(&value.one_like() / value)
}

fn signed_pow(base: &Scalar, e: usize) -> Scalar {
    base.pow_int(e as i64).expect("non-negative exponent")
}

/// `D_q^n 1/(1 - ax) = (q;q)_n a^n / (ax;q)_(n+1)`.
pub fn cf_geometric(a: &Scalar, ctx: &QContext, n: usize, x: &Scalar) -> Result<Scalar> {
    ctx.check(a)?;
    ctx.check(x)?;
    require_nonzero_x(x)?;
    let ax = a * x;
    let den = recip(&qpoch(&ax, ctx, n + 1), || format!("(ax;q)_{}", n + 1))?;
    Ok(&(&qfact(n, ctx) * &signed_pow(a, n)) * &den)
}

/// `D_q^m 1/(ax;q)_n = (q^n;q)_m a^m / (ax;q)_(m+n)`.
pub fn cf_inv_poch(a: &Scalar, ctx: &QContext, m: usize, n: usize, x: &Scalar) -> Result<Scalar> {
    ctx.check(a)?;
    ctx.check(x)?;
    require_nonzero_x(x)?;
    let den = recip(&qpoch(&(a * x), ctx, m + n), || format!("(ax;q)_{}", m + n))?;
    let num = &qpoch(&ctx.q_pow(n as i64), ctx, m) * &signed_pow(a, m);
    Ok(&num * &den)
}

/// `D_q^k x^n/(ax;q)_n`:
/// `(q;q)_n/(ax;q)_n sum_i [k,i] (q^n;q)_(k-i) (ax;q)_i a^(k-i) x^(n-i)
///  / ((q;q)_(n-i) (aq^n x;q)_k)`.
pub fn cf_xn_over_poch(
    a: &Scalar,
    ctx: &QContext,
    k: usize,
    n: usize,
    x: &Scalar,
) -> Result<Scalar> {
    ctx.check(a)?;
    ctx.check(x)?;
    require_nonzero_x(x)?;
    let ax = a * x;
    let inv_axn = recip(&qpoch(&ax, ctx, n), || format!("(ax;q)_{n}"))?;
    let axqn = &ax * &ctx.q_pow(n as i64);
    let inv_tail = recip(&qpoch(&axqn, ctx, k), || format!("(aq^{n}x;q)_{k}"))?;
    let qn = ctx.q_pow(n as i64);
    let mut sum = ctx.zero();
    for i in 0..=k.min(n) {
        let term = &(&(&qbinom(k, i as i64, ctx) * &qpoch(&qn, ctx, k - i))
            * &(&qpoch(&ax, ctx, i) * &signed_pow(a, k - i)))
            * &(&inv_qfact((n - i) as i64, ctx) * &signed_pow(x, n - i));
        sum = &sum + &term;
    }
    Ok(&(&(&qfact(n, ctx) * &inv_axn) * &inv_tail) * &sum)
}

/// `D_q^k (ax;q)_n/(bx;q)_n` for `k <= n`:
/// `(ax,q;q)_n/((bx;q)_n (bq^n x;q)_k) sum_i [k,i] q^C(i,2) (-a)^i b^(k-i)
///  (bx;q)_i (q^n;q)_(k-i) / ((q;q)_(n-i) (ax;q)_i)`.
///
/// The quotient `(ax;q)_n/(ax;q)_i` is formed as `(axq^i;q)_(n-i)`, so a
/// vanishing numerator never meets a vanishing denominator.
pub fn cf_poch_ratio(
    a: &Scalar,
    b: &Scalar,
    ctx: &QContext,
    k: usize,
    n: usize,
    x: &Scalar,
) -> Result<Scalar> {
    ctx.check(a)?;
    ctx.check(b)?;
    ctx.check(x)?;
    require_nonzero_x(x)?;
    if k > n {
        return Err(Error::DomainError(format!(
            "derivative order {k} exceeds length {n}"
        )));
    }
    let ax = a * x;
    let bx = b * x;
    let inv_bxn = recip(&qpoch(&bx, ctx, n), || format!("(bx;q)_{n}"))?;
    let bqnx = &bx * &ctx.q_pow(n as i64);
    let inv_tail = recip(&qpoch(&bqnx, ctx, k), || format!("(bq^{n}x;q)_{k}"))?;
    let qn = ctx.q_pow(n as i64);
    let neg_a = -a;
    let mut sum = ctx.zero();
    for i in 0..=k {
        let axqi = &ax * &ctx.q_pow(i as i64);
        let term = &(&(&qbinom(k, i as i64, ctx) * &ctx.q_pow(binom2(i as i64)))
            * &(&signed_pow(&neg_a, i) * &signed_pow(b, k - i)))
            * &(&(&qpoch(&bx, ctx, i) * &qpoch(&qn, ctx, k - i))
                * &(&inv_qfact((n - i) as i64, ctx) * &qpoch(&axqi, ctx, n - i)));
        sum = &sum + &term;
    }
    Ok(&(&(&qfact(n, ctx) * &inv_bxn) * &inv_tail) * &sum)
}

/// Parameters of `(ax, bx;q)/(cx, dx;q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleRatio {
    pub a: Scalar,
    pub b: Scalar,
    pub c: Scalar,
    pub d: Scalar,
}

impl DoubleRatio {
    pub fn new(a: Scalar, b: Scalar, c: Scalar, d: Scalar) -> Self {
        DoubleRatio { a, b, c, d }
    }

    fn check(&self, ctx: &QContext) -> Result<()> {
        for p in [&self.a, &self.b, &self.c, &self.d] {
            ctx.check(p)?;
        }
        Ok(())
    }
}

/// `D_q^k (ax,bx;q)_n/(cx,dx;q)_n` as the triple sum
///
/// `(q;q)_n^2 (ax,bx;q)_n sum_i [k,i] q^C(i,2)/(bx;q)_i`
/// `  * sum_j [i,j] q^(j(j-i)) (-a)^j (-b)^(i-j) (bq^n x;q)_j`
/// `      / ((q;q)_(n-j) (q;q)_(n-i+j) (ax;q)_j)`
/// `  * 1/((cq^i x, dq^i x;q)_n (dq^(n+i) x;q)_(k-i))`
/// `  * sum_l [k-i,l] (q^n;q)_l (q^n;q)_(k-i-l) (dq^i x;q)_l c^l d^(k-i-l)`
/// `      / (cq^(n+i) x;q)_l`.
pub fn cf_double_ratio(
    p: &DoubleRatio,
    ctx: &QContext,
    k: usize,
    n: usize,
    x: &Scalar,
) -> Result<Scalar> {
    p.check(ctx)?;
    ctx.check(x)?;
    require_nonzero_x(x)?;
    let (ax, bx, cx, dx) = (&p.a * x, &p.b * x, &p.c * x, &p.d * x);
    let qn = ctx.q_pow(n as i64);
    let qf = qfact(n, ctx);
    let prefactor = &(&(&qf * &qf) * &qpoch(&ax, ctx, n)) * &qpoch(&bx, ctx, n);
    let (neg_a, neg_b) = (-&p.a, -&p.b);
    let bqnx = &bx * &qn;
    let mut total = ctx.zero();
    for i in 0..=k {
        let qi = ctx.q_pow(i as i64);
        let inv_bxi = recip(&qpoch(&bx, ctx, i), || format!("(bx;q)_{i}"))?;
        let mut inner_j = ctx.zero();
        for j in 0..=i {
            let inv_axj = recip(&qpoch(&ax, ctx, j), || format!("(ax;q)_{j}"))?;
            let term = &(&(&qbinom(i, j as i64, ctx)
                * &ctx.q_pow(j as i64 * (j as i64 - i as i64)))
                * &(&signed_pow(&neg_a, j) * &signed_pow(&neg_b, i - j)))
                * &(&(&inv_qfact(n as i64 - j as i64, ctx)
                    * &inv_qfact(n as i64 - i as i64 + j as i64, ctx))
                    * &(&qpoch(&bqnx, ctx, j) * &inv_axj));
            inner_j = &inner_j + &term;
        }
        let cqix = &cx * &qi;
        let dqix = &dx * &qi;
        let dqnix = &dqix * &qn;
        let cqnix = &cqix * &qn;
        let den = &(&qpoch(&cqix, ctx, n) * &qpoch(&dqix, ctx, n)) * &qpoch(&dqnix, ctx, k - i);
        let inv_den = recip(&den, || {
            format!("(cq^{i}x, dq^{i}x;q)_{n} (dq^{}x;q)_{}", n + i, k - i)
        })?;
        let mut inner_l = ctx.zero();
        for l in 0..=k - i {
            let inv_c = recip(&qpoch(&cqnix, ctx, l), || {
                format!("(cq^{}x;q)_{l}", n + i)
            })?;
            let term = &(&(&qbinom(k - i, l as i64, ctx) * &qpoch(&qn, ctx, l))
                * &(&qpoch(&qn, ctx, k - i - l) * &qpoch(&dqix, ctx, l)))
                * &(&(&signed_pow(&p.c, l) * &signed_pow(&p.d, k - i - l)) * &inv_c);
            inner_l = &inner_l + &term;
        }
        let outer = &(&(&qbinom(k, i as i64, ctx) * &ctx.q_pow(binom2(i as i64))) * &inv_bxi)
            * &(&(&inner_j * &inv_den) * &inner_l);
        total = &total + &outer;
    }
    Ok(&prefactor * &total)
}

/// `D_q^k (ax,bx;q)_inf/(cx,dx;q)_inf`, the `n -> inf` limit of
/// [`cf_double_ratio`]:
///
/// `(ax,bx;q)_inf/(cx,dx;q)_inf sum_i [k,i] q^C(i,2) (cx,dx;q)_i/(bx;q)_i`
/// `  * sum_j [i,j] q^(j(j-i)) (-a)^j (-b)^(i-j) / (ax;q)_j`
/// `  * sum_l [k-i,l] (dq^i x;q)_l c^l d^(k-i-l)`.
///
/// The infinite-product prefactor needs float mode unless its parameters
/// pair up by integer powers of `q`.
pub fn cf_double_ratio_inf(
    p: &DoubleRatio,
    ctx: &QContext,
    k: usize,
    x: &Scalar,
) -> Result<Approx> {
    p.check(ctx)?;
    ctx.check(x)?;
    require_nonzero_x(x)?;
    let (ax, bx, cx, dx) = (&p.a * x, &p.b * x, &p.c * x, &p.d * x);
    let prefactor = inf_ratio(&[ax.clone(), bx.clone()], &[cx.clone(), dx.clone()], ctx)?;
    let (neg_a, neg_b) = (-&p.a, -&p.b);
    let mut sum = ctx.zero();
    let mut abs_sum = ctx.zero();
    for i in 0..=k {
        let inv_bxi = recip(&qpoch(&bx, ctx, i), || format!("(bx;q)_{i}"))?;
        let mut inner_j = ctx.zero();
        for j in 0..=i {
            let inv_axj = recip(&qpoch(&ax, ctx, j), || format!("(ax;q)_{j}"))?;
            let term = &(&(&qbinom(i, j as i64, ctx)
                * &ctx.q_pow(j as i64 * (j as i64 - i as i64)))
                * &(&signed_pow(&neg_a, j) * &signed_pow(&neg_b, i - j)))
                * &inv_axj;
            inner_j = &inner_j + &term;
        }
        let dqix = &dx * &ctx.q_pow(i as i64);
        let mut inner_l = ctx.zero();
        for l in 0..=k - i {
            let term = &(&qbinom(k - i, l as i64, ctx) * &qpoch(&dqix, ctx, l))
                * &(&signed_pow(&p.c, l) * &signed_pow(&p.d, k - i - l));
            inner_l = &inner_l + &term;
        }
        let outer = &(&(&qbinom(k, i as i64, ctx) * &ctx.q_pow(binom2(i as i64)))
            * &(&(&qpoch(&cx, ctx, i) * &qpoch(&dx, ctx, i)) * &inv_bxi))
            * &(&inner_j * &inner_l);
        abs_sum = &abs_sum + &outer.abs();
        sum = &sum + &outer;
    }
    let mut result = prefactor.scale(&sum);
    // rounding in the finite sums: a few dozen operations per term
    let ops = ctx.int(16 * (k as i64 + 1) * (k as i64 + 2));
    let rounding = &(&(&ops * &ctx.eps()) * &abs_sum) * &prefactor.value.abs();
    result.bound = &result.bound + &rounding;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qdiff::{dq_iter, FunctionHandle};
    use rug::Rational;

    fn ex(p: i64, d: i64) -> QContext {
        QContext::exact(Rational::from((p, d))).unwrap()
    }

    #[test]
    fn geometric_first_derivative() {
        // (1/(1 - x/2) - 1/(1 - x/4)) / (1/2) at x = 1/2 is 4/3 when a = 1
        let ctx = ex(1, 2);
        let v = cf_geometric(&ctx.one(), &ctx, 1, &ctx.ratio(1, 2)).unwrap();
        assert_eq!(v, ctx.ratio(4, 3));
        // shape (q;q)_1 a / (ax;q)_2
        let a = ctx.ratio(2, 7);
        let x = ctx.ratio(3, 5);
        let expected = &(&(&ctx.one() - ctx.q()) * &a) / &qpoch(&(&a * &x), &ctx, 2);
        assert_eq!(cf_geometric(&a, &ctx, 1, &x).unwrap(), expected);
        assert!(cf_geometric(&ctx.zero(), &ctx, 3, &x).unwrap().is_zero());
    }

    #[test]
    fn geometric_pole_is_named() {
        let ctx = ex(1, 2);
        // ax q = 1 when a = 4, x = 1/2
        let err = cf_geometric(&ctx.int(4), &ctx, 2, &ctx.ratio(1, 2)).unwrap_err();
        assert!(err.is_pole(), "{err}");
    }

    #[test]
    fn inverse_poch_degenerate_cases() {
        let ctx = ex(1, 3);
        let a = ctx.ratio(1, 3);
        let x = ctx.ratio(1, 2);
        assert_eq!(
            cf_inv_poch(&a, &ctx, 0, 3, &x).unwrap(),
            &ctx.one() / &qpoch(&(&a * &x), &ctx, 3)
        );
        assert!(cf_inv_poch(&a, &ctx, 2, 0, &x).unwrap().is_zero());
    }

    #[test]
    fn xn_over_poch_degenerate_cases() {
        let ctx = ex(1, 3);
        let a = ctx.ratio(1, 4);
        let x = ctx.ratio(2, 3);
        let direct = &x.pow_int(3).unwrap() / &qpoch(&(&a * &x), &ctx, 3);
        assert_eq!(cf_xn_over_poch(&a, &ctx, 0, 3, &x).unwrap(), direct);
        assert!(cf_xn_over_poch(&a, &ctx, 2, 0, &x).unwrap().is_zero());
    }

    #[test]
    fn poch_ratio_constant_when_parameters_agree() {
        let ctx = ex(2, 5);
        let a = ctx.ratio(1, 3);
        let x = ctx.one();
        for n in 1..6 {
            for k in 1..=n {
                assert!(cf_poch_ratio(&a, &a, &ctx, k, n, &x).unwrap().is_zero());
            }
        }
        assert!(matches!(
            cf_poch_ratio(&a, &a, &ctx, 4, 3, &x),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn double_ratio_identity_is_constant() {
        let ctx = ex(1, 2);
        let p = DoubleRatio::new(ctx.ratio(1, 2), ctx.ratio(1, 3), ctx.ratio(1, 2), ctx.ratio(1, 3));
        assert!(cf_double_ratio(&p, &ctx, 2, 3, &ctx.one()).unwrap().is_zero());
        assert_eq!(cf_double_ratio(&p, &ctx, 0, 3, &ctx.one()).unwrap(), ctx.one());
    }

    #[test]
    fn double_ratio_inf_needs_pairable_products_in_exact_mode() {
        let ctx = ex(1, 2);
        let p = DoubleRatio::new(ctx.ratio(1, 2), ctx.ratio(1, 3), ctx.ratio(1, 5), ctx.ratio(1, 7));
        assert!(matches!(
            cf_double_ratio_inf(&p, &ctx, 1, &ctx.one()),
            Err(Error::ExactModeUnsupported(_))
        ));
        let same = DoubleRatio::new(ctx.ratio(1, 2), ctx.ratio(1, 3), ctx.ratio(1, 2), ctx.ratio(1, 3));
        assert!(cf_double_ratio_inf(&same, &ctx, 2, &ctx.one()).unwrap().value.is_zero());
    }

    #[test]
    fn inverse_poch_matches_lattice_at_sample_point() {
        let ctx = ex(1, 2);
        let a = ctx.ratio(1, 3);
        let f = {
            let a = a.clone();
            FunctionHandle::from_fn(move |x, ctx| Ok(&ctx.one() / &qpoch(&(&a * x), ctx, 3)))
        };
        let x = ctx.ratio(1, 2);
        assert_eq!(
            cf_inv_poch(&a, &ctx, 2, 3, &x).unwrap(),
            dq_iter(&f, &ctx, 2, &x).unwrap()
        );
    }
}
