//! The deformed q-exponential operator
//! `T(y D_q | u) = sum_n u^C(n,2) (y D_q)^n / (q;q)_n`
//! as a truncated series on black-box functions, and its closed forms on
//! q-shifted factorial quotients and on deformed series.

use rug::ops::Pow;
use rug::{Integer, Rational};

use crate::context::{QContext, TruncationPolicy};
use crate::error::{Error, Result};
use crate::qcore::{binom2, qbinom, qfact, qpoch};
use crate::qdiff::{difference, recip, FunctionHandle, LatticeEntry, EVAL_SLACK_ULPS};
use crate::qhyper::{convergence, dphi_with, Combination, SeriesResult, SeriesSpec, Terms, Termination};
use crate::scalar::{Approx, Scalar};
use crate::sum::{Accumulator, Step};

/// Upper limit on extra working precision for the operator series.
const MAX_GUARD_BITS: u32 = 1 << 15;

/// Rounded operations charged per coefficient in the closed forms.
const COEFF_OPS: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    pub y: Scalar,
    pub u: Scalar,
    /// Governs the operator index only; series inside closed forms use the
    /// context's own policy.
    pub trunc: TruncationPolicy,
}

impl OperatorSpec {
    /// At most 40 operator terms, relative tolerance `10^-30`, window 3.
    pub fn new(y: Scalar, u: Scalar) -> Self {
        let rel_tol = Rational::from((1, Integer::from(10).pow(30u32)));
        OperatorSpec {
            y,
            u,
            trunc: TruncationPolicy::new(40, rel_tol, 3).expect("valid default policy"),
        }
    }

    pub fn with_truncation(mut self, trunc: TruncationPolicy) -> Result<Self> {
        trunc.validate()?;
        self.trunc = trunc;
        Ok(self)
    }

    fn check(&self, ctx: &QContext) -> Result<()> {
        self.trunc.validate()?;
        ctx.check(&self.y)?;
        ctx.check(&self.u)
    }

    /// `ctx` with this operator's truncation policy.
    fn context(&self, ctx: &QContext) -> Result<QContext> {
        self.check(ctx)?;
        Ok(ctx.clone().with_truncation(self.trunc.clone()))
    }
}

/// `u^C(n,2) y^n / (q;q)_n`, the weight of `D_q^n`.
pub fn operator_coefficient(op: &OperatorSpec, ctx: &QContext, n: usize) -> Result<Scalar> {
    let ni = n as i64;
    let num = &op.u.pow_int(binom2(ni))? * &op.y.pow_int(ni)?;
    Ok(&num / &qfact(n, ctx))
}

/// Weights `b^n / (q;q)_n` of the undeformed operator `T(b D_q)`.
pub fn chen_liu_coefficients(b: &Scalar, ctx: &QContext, count: usize) -> Result<Vec<Scalar>> {
    (0..count)
        .map(|n| Ok(&b.pow_int(n as i64)? / &qfact(n, ctx)))
        .collect()
}

/// Weights `(-1)^n q^C(n,2) b^n / (q;q)_n` of the operator `R(b D_q)`.
pub fn saad_coefficients(b: &Scalar, ctx: &QContext, count: usize) -> Result<Vec<Scalar>> {
    (0..count)
        .map(|n| {
            let ni = n as i64;
            let sign = if n % 2 == 0 { ctx.one() } else { ctx.int(-1) };
            let num = &(&sign * &ctx.q_pow(binom2(ni))) * &b.pow_int(ni)?;
            Ok(&num / &qfact(n, ctx))
        })
        .collect()
}

/// Extra bits so that cancellation in the weighted differences
/// `u^C(N,2) y^N / (q;q)_N D^N f(x)` stays below the working precision for
/// every `N <= max_terms`.
fn operator_guard(op: &OperatorSpec, ctx: &QContext, x: &Scalar) -> u32 {
    let lq = -ctx.q().log2_abs();
    let lx = -x.log2_abs();
    let lu = op.u.log2_abs();
    let ly = op.y.log2_abs();
    let aq = ctx.q().to_f64().abs();
    let mut log_poch = 0.0f64;
    let mut worst = 0.0f64;
    for n in 1..=op.trunc.max_terms {
        log_poch += (1.0 - aq.powi(n as i32)).abs().log2();
        let nf = n as f64;
        let pairs = nf * (nf - 1.0) / 2.0;
        let mut bits = nf + pairs * lq + nf * lx + nf * ly - log_poch;
        if pairs > 0.0 {
            bits += pairs * lu;
        }
        if bits.is_finite() {
            worst = worst.max(bits);
        }
    }
    (worst + 32.0).min(MAX_GUARD_BITS as f64).ceil() as u32
}

struct OperatorRun {
    value: Scalar,
    tail: Scalar,
    bound: Scalar,
    rounding: Scalar,
    terms: usize,
}

/// One pass of the operator series at the precision of `eval_ctx`, stopping
/// by the policy of `acc_ctx`. The difference table grows one anti-diagonal
/// per term, so `N` terms cost `N` evaluations.
fn run_operator(
    op: &OperatorSpec,
    f: &FunctionHandle,
    eval_ctx: &QContext,
    acc_ctx: &QContext,
    x: &Scalar,
) -> Result<OperatorRun> {
    let q = eval_ctx.q().clone();
    let one = eval_ctx.one();
    let eps = eval_ctx.eps();
    let (x, y, u) = (eval_ctx.round(x), eval_ctx.round(&op.y), eval_ctx.round(&op.u));
    let entry = |v: Approx| LatticeEntry {
        abs: v.value.abs(),
        value: v.value,
        bound: v.bound,
    };
    let mut points = vec![x.clone()];
    // diag[m] = D^m f(x_(n-m)) with x_j = x q^j
    let mut diag = vec![entry(f.eval(&x, eval_ctx)?)];
    let mut acc = Accumulator::new(acc_ctx);
    let mut coeff = one.clone();
    let mut un = one.clone();
    let mut qn1 = q.clone();
    let mut n = 0usize;
    loop {
        let d = &diag[n];
        let slack = eval_ctx.int(2 * (n as i64 + 1) + EVAL_SLACK_ULPS);
        let table_err = &d.bound + &(&(&slack * &eps) * &d.abs);
        let value = &coeff * &d.value;
        let coeff_err = &(&eval_ctx.int(4 * (n as i64 + 1)) * &eps) * &value.abs();
        let term = Approx::new(value, &(&coeff.abs() * &table_err) + &coeff_err);
        if let Step::Done { tail } = acc.push(&term, None)? {
            return Ok(OperatorRun {
                value: acc.sum().clone(),
                tail,
                bound: acc.bound().clone(),
                rounding: acc.rounding(4),
                terms: acc.terms(),
            });
        }
        let next_point = &points[n] * &q;
        let mut next = Vec::with_capacity(n + 2);
        next.push(entry(f.eval(&next_point, eval_ctx)?));
        for m in 0..=n {
            let d = difference(&diag[m], &next[m], &points[n - m]);
            next.push(d);
        }
        points.push(next_point);
        diag = next;
        coeff = &(&(&coeff * &un) * &y) / &(&one - &qn1);
        un = &un * &u;
        qn1 = &qn1 * &q;
        n += 1;
    }
}

/// `T(y D_q | u) f (x)` as a truncated operator series.
///
/// Float mode runs the differences at a raised precision chosen from the
/// truncation limit, and retries with more bits if the observed error still
/// exceeds the target. The error bound covers evaluator bounds, rounding in
/// the difference table and in the sum; the tail estimate is empirical.
pub fn t_apply(op: &OperatorSpec, f: &FunctionHandle, ctx: &QContext, x: &Scalar) -> Result<SeriesResult> {
    ctx.check(x)?;
    let ctx = op.context(ctx)?;
    if x.is_zero() {
        return Err(Error::ZeroEvaluationPoint);
    }
    if op.y.is_zero() {
        let v = f.eval(x, &ctx)?;
        return Ok(SeriesResult {
            tail_estimate: Some(v.value.zero_like()),
            value: v.value,
            terms_used: 1,
            terminated: Termination::ExactTerminating,
            rounding: v.bound,
        });
    }
    let Some(prec) = ctx.precision() else {
        let run = run_operator(op, f, &ctx, &ctx, x)?;
        return Ok(SeriesResult {
            value: run.value,
            terms_used: run.terms,
            terminated: Termination::TailTolerance,
            tail_estimate: Some(run.tail),
            rounding: run.bound,
        });
    };
    let mut guard = operator_guard(op, &ctx, x);
    let mut attempts = 0;
    loop {
        let eval_ctx = ctx.boosted(guard);
        let acc_ctx = eval_ctx.clone().with_truncation(op.trunc.clone());
        let run = run_operator(op, f, &eval_ctx, &acc_ctx, x)?;
        let err = &run.bound + &run.rounding;
        let deficit = err.log2_abs() - run.value.log2_abs() + prec as f64 + 8.0;
        if deficit > 0.0 && !run.value.is_zero() && attempts < 2 && guard < MAX_GUARD_BITS {
            guard = (guard + deficit.ceil() as u32 + 8).min(MAX_GUARD_BITS);
            attempts += 1;
            continue;
        }
        let value = ctx.round(&run.value);
        let rounding = &ctx.round(&err) + &(&value.abs() * &ctx.eps());
        return Ok(SeriesResult {
            value,
            terms_used: run.terms,
            terminated: Termination::TailTolerance,
            tail_estimate: Some(ctx.round(&run.tail)),
            rounding,
        });
    }
}

/// The partial sums of the operator series, `count` of them, with no stopping
/// rule. Exact mode, or float at the context's own precision.
pub fn t_partial_sums(
    op: &OperatorSpec,
    f: &FunctionHandle,
    ctx: &QContext,
    x: &Scalar,
    count: usize,
) -> Result<Vec<Scalar>> {
    ctx.check(x)?;
    let ctx = op.context(ctx)?;
    if x.is_zero() {
        return Err(Error::ZeroEvaluationPoint);
    }
    let mut sums = Vec::with_capacity(count);
    let mut sum = ctx.zero();
    let mut points = Vec::with_capacity(count);
    let mut diag: Vec<LatticeEntry> = Vec::with_capacity(count);
    let mut xj = x.clone();
    for n in 0..count {
        let v = f.eval(&xj, &ctx)?;
        let mut next = vec![LatticeEntry {
            abs: v.value.abs(),
            value: v.value,
            bound: v.bound,
        }];
        for m in 0..n {
            let d = difference(&diag[m], &next[m], &points[n - 1 - m]);
            next.push(d);
        }
        points.push(xj.clone());
        diag = next;
        sum = &sum + &(&operator_coefficient(op, &ctx, n)? * &diag[n].value);
        sums.push(sum.clone());
        xj = &xj * ctx.q();
    }
    Ok(sums)
}

/// `1Phi1(q^n; lower; q, u/q, w)`.
fn phi11(n: usize, lower: Scalar, w: Scalar, u: &Scalar, ctx: &QContext) -> Result<SeriesResult> {
    let spec = SeriesSpec::new(vec![ctx.q_pow(n as i64)], vec![lower], w);
    dphi_with(&spec, ctx, &(u / ctx.q()))
}

/// `T(y D_q | u) { 1/(ax;q)_n } = 1/(ax;q)_n 1Phi1(q^n; a q^n x; q, u/q, -a y)`.
pub fn t_inv_poch(a: &Scalar, op: &OperatorSpec, ctx: &QContext, n: usize, x: &Scalar) -> Result<SeriesResult> {
    ctx.check(a)?;
    ctx.check(x)?;
    op.check(ctx)?;
    let ax = a * x;
    let pre = recip(&qpoch(&ax, ctx, n), || format!("(ax;q)_{n}"))?;
    let inner = phi11(n, &ax * ctx.q_pow(n as i64), -&(a * &op.y), &op.u, ctx)?;
    let mut total = Combination::new(ctx);
    total.add(&pre, &inner);
    Ok(total.finish(ctx, COEFF_OPS))
}

/// `T(y D_q | u) { (ax;q)_n / (bx;q)_n }` as the finite sum
/// `sum_i (uq)^C(i,2) [n,i] (-ay)^i (ax q^i;q)_(n-i) / ((bx q^i;q)_(n-i) (b q^n x;q)_i)
///  * 1Phi1(q^n; b q^(n+i) x; q, u/q, -u^i b y)`.
pub fn t_poch_ratio(
    a: &Scalar,
    b: &Scalar,
    op: &OperatorSpec,
    ctx: &QContext,
    n: usize,
    x: &Scalar,
) -> Result<SeriesResult> {
    for p in [a, b, x] {
        ctx.check(p)?;
    }
    op.check(ctx)?;
    let (ax, bx) = (a * x, b * x);
    let uq = &op.u * ctx.q();
    let ay = &(a * &op.y) * ctx.int(-1);
    let by = b * &op.y;
    let mut total = Combination::new(ctx);
    for i in 0..=n {
        let ii = i as i64;
        let qi = ctx.q_pow(ii);
        let qni = ctx.q_pow((n + i) as i64);
        let num = &(&(&uq.pow_int(binom2(ii))? * &qbinom(n, ii, ctx)) * &ay.pow_int(ii)?)
            * &qpoch(&(&ax * &qi), ctx, n - i);
        let den = &qpoch(&(&bx * &qi), ctx, n - i) * &qpoch(&(&bx * ctx.q_pow(n as i64)), ctx, i);
        let coeff = &num * &recip(&den, || format!("(bx;q)_{}", n + i))?;
        let w = -&(&op.u.pow_int(ii)? * &by);
        total.add(&coeff, &phi11(n, &bx * &qni, w, &op.u, ctx)?);
    }
    Ok(total.finish(ctx, COEFF_OPS))
}

/// The sum that `t_poch_ratio` reduces to at `a = b`:
/// `sum_i (uq)^C(i,2) [n,i] (-ay)^i / (a q^n x;q)_i
///  * 1Phi1(q^n; a q^(n+i) x; q, u/q, -u^i a y)`, identically one.
pub fn poch_ratio_unit_sum(a: &Scalar, op: &OperatorSpec, ctx: &QContext, n: usize, x: &Scalar) -> Result<SeriesResult> {
    ctx.check(a)?;
    ctx.check(x)?;
    op.check(ctx)?;
    let ax = a * x;
    let uq = &op.u * ctx.q();
    let ay = &(a * &op.y) * ctx.int(-1);
    let mut total = Combination::new(ctx);
    for i in 0..=n {
        let ii = i as i64;
        let num = &(&uq.pow_int(binom2(ii))? * &qbinom(n, ii, ctx)) * &ay.pow_int(ii)?;
        let den = qpoch(&(&ax * ctx.q_pow(n as i64)), ctx, i);
        let coeff = &num * &recip(&den, || format!("(a q^{n} x;q)_{i}"))?;
        let w = -&(&op.u.pow_int(ii)? * &(a * &op.y));
        total.add(&coeff, &phi11(n, &ax * ctx.q_pow((n + i) as i64), w, &op.u, ctx)?);
    }
    Ok(total.finish(ctx, COEFF_OPS))
}

/// `T(y D_q | u) { x^n/(ax;q)_n }` as the finite sum
/// `sum_i [n,i] u^C(i,2) x^(n-i) y^i / ((ax q^i;q)_(n-i) (a q^n x;q)_i)
///  * 1Phi1(q^n; a q^(n+i) x; q, u/q, -u^i a y)`.
pub fn t_xn_over_poch(a: &Scalar, op: &OperatorSpec, ctx: &QContext, n: usize, x: &Scalar) -> Result<SeriesResult> {
    ctx.check(a)?;
    ctx.check(x)?;
    op.check(ctx)?;
    let ax = a * x;
    let mut total = Combination::new(ctx);
    for i in 0..=n {
        let ii = i as i64;
        let num = &(&(&qbinom(n, ii, ctx) * &op.u.pow_int(binom2(ii))?) * &x.pow_int((n - i) as i64)?)
            * &op.y.pow_int(ii)?;
        let den = &qpoch(&(&ax * ctx.q_pow(ii)), ctx, n - i)
            * &qpoch(&(&ax * ctx.q_pow(n as i64)), ctx, i);
        let coeff = &num * &recip(&den, || format!("(ax;q)_{}", n + i))?;
        let w = -&(&op.u.pow_int(ii)? * &(a * &op.y));
        total.add(&coeff, &phi11(n, &ax * ctx.q_pow((n + i) as i64), w, &op.u, ctx)?);
    }
    Ok(total.finish(ctx, COEFF_OPS))
}

/// Adds `coeff * part` to an outer accumulator, carrying the part's error.
fn push_part(acc: &mut Accumulator, coeff: &Scalar, part: &SeriesResult) -> Result<Step> {
    let bound = &coeff.abs() * &part.error_bound();
    acc.push(&Approx::new(coeff * &part.value, bound), None)
}

fn outer_result(acc: &Accumulator, tail: Scalar, scale: &Scalar, ctx: &QContext) -> SeriesResult {
    let s = scale.abs();
    SeriesResult {
        value: acc.sum() * scale,
        terms_used: acc.terms(),
        terminated: Termination::TailTolerance,
        tail_estimate: Some(&(&tail + acc.bound()) * &s),
        rounding: &(&acc.rounding(COEFF_OPS) * &s) + &(&acc.sum().abs() * &(&s * ctx.eps())),
    }
}

/// `T(z D_q | v)` applied in `x` to `t_inv_poch(a, (y, u), n, x)`:
/// `1/(ax;q)_n sum_k u^C(k,2) (q^n;q)_k (ay)^k / ((q;q)_k (a x q^n;q)_k)
///  * 1Phi1(q^(n+k); a q^(n+k) x; q, v/q, -a z)`.
///
/// `opz` carries `(z, v)`; the outer sum over `k` stops by the empirical rule.
pub fn t_of_1phi1(
    a: &Scalar,
    opz: &OperatorSpec,
    ctx: &QContext,
    u: &Scalar,
    y: &Scalar,
    n: usize,
    x: &Scalar,
) -> Result<SeriesResult> {
    for p in [a, u, y, x] {
        ctx.check(p)?;
    }
    opz.check(ctx)?;
    let one = ctx.one();
    let ax = a * x;
    let pre = recip(&qpoch(&ax, ctx, n), || format!("(ax;q)_{n}"))?;
    let az = -&(a * &opz.y);
    let ay = a * y;
    let mut acc = Accumulator::new(ctx);
    let mut coeff = one.clone();
    let mut uk = one.clone();
    let mut k = 0usize;
    loop {
        let nk = (n + k) as i64;
        let inner = phi11(n + k, &ax * ctx.q_pow(nk), az.clone(), &opz.u, ctx)?;
        let step = push_part(&mut acc, &coeff, &inner)?;
        let last = n == 0 || y.is_zero();
        if last {
            let mut total = Combination::new(ctx);
            total.add(&(&pre * &coeff), &inner);
            return Ok(total.finish(ctx, COEFF_OPS));
        }
        if let Step::Done { tail } = step {
            return Ok(outer_result(&acc, tail, &pre, ctx));
        }
        let den = &(&one - ctx.q_pow(k as i64 + 1)) * &(&one - &(&ax * ctx.q_pow(nk)));
        let num = &(&(&coeff * &uk) * &(&one - ctx.q_pow(nk))) * &ay;
        coeff = &num * &recip(&den, || format!("(a x q^{n};q)_{}", k + 1))?;
        uk = &uk * u;
        k += 1;
    }
}

/// `T(y D_q | v)` applied in `x` to `r Phi s(a; b_1 x, b_2..; q, u, z)`:
/// `sum_n t_n * 1Phi1(q^n; q^n b_1 x; q, v/q, -b_1 y)` where `t_n` is the
/// n-th term of the series. `spec.lower[0]` holds `b_1` itself.
pub fn t_of_rphis(
    spec: &SeriesSpec,
    x: &Scalar,
    op: &OperatorSpec,
    ctx: &QContext,
    u: &Scalar,
) -> Result<SeriesResult> {
    ctx.check(x)?;
    ctx.check(u)?;
    op.check(ctx)?;
    let Some(b1) = spec.lower.first() else {
        return Err(Error::DomainError("series has no lower parameter".into()));
    };
    let mut scaled = spec.clone();
    scaled.lower[0] = b1 * x;
    let b1x = scaled.lower[0].clone();
    let w = -&(b1 * &op.y);
    let ending = convergence(&scaled, ctx, u)?;
    let mut terms = Terms::new(&scaled, ctx, u);
    let mut acc = Accumulator::new(ctx);
    let mut total = Combination::new(ctx);
    let mut n = 0usize;
    loop {
        let inner = phi11(n, &b1x * ctx.q_pow(n as i64), w.clone(), &op.u, ctx)?;
        match ending {
            Some(m) => {
                total.add(&terms.term, &inner);
                if n == m {
                    return Ok(total.finish(ctx, COEFF_OPS));
                }
            }
            None => {
                if let Step::Done { tail } = push_part(&mut acc, &terms.term, &inner)? {
                    return Ok(outer_result(&acc, tail, &ctx.one(), ctx));
                }
            }
        }
        terms.advance()?;
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(p: i64, d: i64) -> QContext {
        QContext::exact(Rational::from((p, d))).unwrap()
    }

    #[test]
    fn zero_y_is_the_identity() {
        let ctx = &ex(1, 2);
        let f = FunctionHandle::from_fn(|x, _| Ok(x * x));
        let op = OperatorSpec::new(ctx.zero(), ctx.ratio(1, 3));
        let r = t_apply(&op, &f, ctx, &ctx.ratio(2, 3)).unwrap();
        assert_eq!(r.value, ctx.ratio(4, 9));
        assert_eq!(r.terms_used, 1);
    }

    #[test]
    fn polynomial_series_terminates() {
        // T(yD|u) x^2 = x^2 + y (1+q) x + u y^2
        let ctx = &ex(1, 2);
        let f = FunctionHandle::from_fn(|x, _| Ok(x * x));
        let (x, y, u) = (ctx.ratio(2, 3), ctx.ratio(1, 5), ctx.ratio(1, 7));
        let op = OperatorSpec::new(y.clone(), u.clone());
        let r = t_apply(&op, &f, ctx, &x).unwrap();
        let expect = &(&(&x * &x) + &(&(&y * ctx.ratio(3, 2)) * &x)) + &(&u * &(&y * &y));
        assert_eq!(r.value, expect);
        assert!(f.calls() <= op.trunc.max_terms + 1);
    }

    #[test]
    fn deformations_reduce_to_known_operators() {
        let ctx = &ex(1, 3);
        let b = ctx.ratio(2, 7);
        let chen = chen_liu_coefficients(&b, ctx, 20).unwrap();
        let saad = saad_coefficients(&b, ctx, 20).unwrap();
        let at_one = OperatorSpec::new(b.clone(), ctx.one());
        let at_q = OperatorSpec::new(-&b, ctx.q().clone());
        for n in 0..20 {
            assert_eq!(operator_coefficient(&at_one, ctx, n).unwrap(), chen[n]);
            assert_eq!(operator_coefficient(&at_q, ctx, n).unwrap(), saad[n]);
        }
    }

    #[test]
    fn trivial_closed_forms() {
        let ctx = &ex(1, 2);
        let (a, x) = (ctx.ratio(1, 3), ctx.ratio(1, 2));
        let op = OperatorSpec::new(ctx.ratio(1, 4), ctx.ratio(1, 2));
        assert!(t_inv_poch(&a, &op, ctx, 0, &x).unwrap().value.is_one());
        assert!(t_xn_over_poch(&a, &op, ctx, 0, &x).unwrap().value.is_one());
        let still = OperatorSpec::new(ctx.zero(), ctx.ratio(1, 2));
        let r = t_inv_poch(&a, &still, ctx, 3, &x).unwrap();
        assert_eq!(r.value, ctx.one() / &qpoch(&(&a * &x), ctx, 3));
        let b = ctx.ratio(1, 5);
        let r = t_poch_ratio(&a, &b, &still, ctx, 2, &x).unwrap();
        assert_eq!(r.value, &qpoch(&(&a * &x), ctx, 2) / &qpoch(&(&b * &x), ctx, 2));
    }
}
