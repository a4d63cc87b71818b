//! Basic hypergeometric series `r phi s` and the deformed `r Phi s`.
//!
//! The n-th term of the deformed series is
//! `u^C(n,2) (a_1..a_r;q)_n / ((q, b_1..b_s;q)_n) [(-1)^n q^C(n,2)]^(1+s-r) z^n`;
//! `u = 1` gives the ordinary series.

use crate::context::QContext;
use crate::error::{Error, Result};
use crate::qcore::{binom2, qfact, qpoch};
use crate::qdiff::recip;
use crate::scalar::{Approx, Scalar};
use crate::sum::{Accumulator, Step};

/// Float mode recomputes a term from its definition this often.
const DIRECT_EVERY: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesSpec {
    pub upper: Vec<Scalar>,
    pub lower: Vec<Scalar>,
    pub z: Scalar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// An upper parameter `q^-m` (or `z = 0`) ends the series.
    ExactTerminating,
    /// Stopped by the truncation rule with a bounded tail.
    TailTolerance,
    /// Stopped after a caller-chosen number of terms; no tail estimate.
    MaxTerms,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesResult {
    pub value: Scalar,
    pub terms_used: usize,
    pub terminated: Termination,
    /// Bound on the neglected tail; zero for terminating series.
    pub tail_estimate: Option<Scalar>,
    /// Bound on accumulated rounding error (zero in exact mode).
    pub rounding: Scalar,
}

impl SeriesResult {
    fn terminating(value: Scalar, terms_used: usize, rounding: Scalar) -> Self {
        let zero = value.zero_like();
        SeriesResult {
            value,
            terms_used,
            terminated: Termination::ExactTerminating,
            tail_estimate: Some(zero),
            rounding,
        }
    }

    /// Tail plus rounding.
    pub fn error_bound(&self) -> Scalar {
        match &self.tail_estimate {
            Some(t) => t + &self.rounding,
            None => self.rounding.clone(),
        }
    }

    pub fn approx(&self) -> Approx {
        Approx::new(self.value.clone(), self.error_bound())
    }

    /// The result multiplied by an exactly known factor (plus one rounding).
    pub fn scaled(&self, factor: &Scalar) -> SeriesResult {
        let af = factor.abs();
        let value = &self.value * factor;
        let eps = match value.precision() {
            Some(p) => value.one_like().with_precision(p).pow_int(1 - p as i64).unwrap(),
            None => value.zero_like(),
        };
        SeriesResult {
            rounding: &(&self.rounding * &af) + &(&value.abs() * &eps),
            tail_estimate: self.tail_estimate.as_ref().map(|t| t * &af),
            value,
            terms_used: self.terms_used,
            terminated: self.terminated,
        }
    }
}

/// Linear combination of series results with exactly known coefficients.
pub(crate) struct Combination {
    value: Scalar,
    tail: Option<Scalar>,
    rounding: Scalar,
    scale: Scalar,
    terms_used: usize,
    all_exact: bool,
}

impl Combination {
    pub(crate) fn new(ctx: &QContext) -> Self {
        Combination {
            value: ctx.zero(),
            tail: Some(ctx.zero()),
            rounding: ctx.zero(),
            scale: ctx.zero(),
            terms_used: 0,
            all_exact: true,
        }
    }

    pub(crate) fn add(&mut self, coeff: &Scalar, part: &SeriesResult) {
        let c = coeff.abs();
        let v = coeff * &part.value;
        self.scale = &self.scale + &v.abs();
        self.value = &self.value + &v;
        self.rounding = &self.rounding + &(&c * &part.rounding);
        self.tail = match (self.tail.take(), &part.tail_estimate) {
            (Some(a), Some(b)) => Some(&a + &(&c * b)),
            _ => None,
        };
        self.terms_used = self.terms_used.max(part.terms_used);
        self.all_exact &= part.terminated == Termination::ExactTerminating;
    }

    /// Closes the sum; each coefficient is charged `ops` rounded operations.
    pub(crate) fn finish(self, ctx: &QContext, ops: usize) -> SeriesResult {
        let extra = &(&ctx.eps() * &ctx.int(ops as i64)) * &self.scale;
        let terminated = match (&self.tail, self.all_exact) {
            (None, _) => Termination::MaxTerms,
            (Some(_), true) => Termination::ExactTerminating,
            (Some(_), false) => Termination::TailTolerance,
        };
        SeriesResult {
            value: self.value,
            terms_used: self.terms_used,
            terminated,
            tail_estimate: self.tail,
            rounding: &self.rounding + &extra,
        }
    }
}

impl SeriesSpec {
    pub fn new(upper: Vec<Scalar>, lower: Vec<Scalar>, z: Scalar) -> Self {
        SeriesSpec { upper, lower, z }
    }

    /// `1 + s - r`, the power of `(-1)^n q^C(n,2)` in each term.
    pub fn excess(&self) -> i64 {
        1 + self.lower.len() as i64 - self.upper.len() as i64
    }

    fn check(&self, ctx: &QContext) -> Result<()> {
        for p in self.upper.iter().chain(&self.lower).chain([&self.z]) {
            ctx.check(p)?;
        }
        Ok(())
    }

    /// Smallest `m` with some upper parameter equal to `q^-m`, searched up
    /// to `max_terms`.
    fn terminating_index(&self, ctx: &QContext) -> Option<usize> {
        let half = ctx.ratio(1, 2);
        self.upper
            .iter()
            .filter_map(|a| {
                let mut p = a.clone();
                for m in 0..=ctx.truncation().max_terms {
                    if ctx.is_zero_factor(&(&ctx.one() - &p)) {
                        return Some(m);
                    }
                    if p.cmp_abs(&half).ok()?.is_lt() {
                        return None;
                    }
                    p = &p * ctx.q();
                }
                None
            })
            .min()
    }
}

/// Generates successive terms through the term ratio
/// `t_(n+1)/t_n = prod(1 - a_i q^n) / (prod(1 - b_j q^n) (1 - q^(n+1)))
///  * (-q^n)^(1+s-r) u^n z`.
pub(crate) struct Terms<'a> {
    spec: &'a SeriesSpec,
    ctx: &'a QContext,
    u: &'a Scalar,
    excess: i64,
    sign: Scalar,
    n: usize,
    qn: Scalar,
    un: Scalar,
    pub(crate) term: Scalar,
}

impl<'a> Terms<'a> {
    pub(crate) fn new(spec: &'a SeriesSpec, ctx: &'a QContext, u: &'a Scalar) -> Self {
        let excess = spec.excess();
        let sign = if excess.rem_euclid(2) == 0 {
            ctx.one()
        } else {
            ctx.int(-1)
        };
        Terms {
            spec,
            ctx,
            u,
            excess,
            sign,
            n: 0,
            qn: ctx.one(),
            un: ctx.one(),
            term: ctx.one(),
        }
    }

    /// Advances to `t_(n+1)`.
    pub(crate) fn advance(&mut self) -> Result<()> {
        let ctx = self.ctx;
        let one = ctx.one();
        let mut num = one.clone();
        for a in &self.spec.upper {
            let f = &one - &(a * &self.qn);
            if ctx.is_zero_factor(&f) {
                num = ctx.zero();
                break;
            }
            num = &num * &f;
        }
        let mut den = &one - &(&self.qn * ctx.q());
        for (j, b) in self.spec.lower.iter().enumerate() {
            let f = &one - &(b * &self.qn);
            if ctx.is_zero_factor(&f) {
                return Err(Error::LowerParameterPole { index: j + 1, m: self.n });
            }
            den = &den * &f;
        }
        let shift = &self.sign * &self.qn.pow_int(self.excess)?;
        let factor = &(&(&num / &den) * &shift) * &(&self.un * &self.spec.z);
        self.term = &self.term * &factor;
        self.n += 1;
        self.qn = &self.qn * ctx.q();
        self.un = &self.un * self.u;
        if !ctx.is_exact() && self.n % DIRECT_EVERY == 0 && !self.term.is_zero() {
            self.term = term_direct(self.spec, ctx, self.u, self.n)?;
        }
        Ok(())
    }

    /// Proven bound on `|t_(m+1)/t_m|` for all `m >= n` when
    /// `|u| |q|^(1+s-r) <= 1`; infinite when no bound applies.
    fn ratio_bound(&self, g: f64) -> f64 {
        let aq = self.ctx.q().to_f64().abs();
        let qn = aq.powi(self.n as i32);
        let mut rho = self.spec.z.to_f64().abs() * g.powi(self.n as i32) / (1.0 - qn * aq);
        for a in &self.spec.upper {
            rho *= 1.0 + a.to_f64().abs() * qn;
        }
        for b in &self.spec.lower {
            let f = 1.0 - b.to_f64().abs() * qn;
            if f <= 0.0 {
                return f64::INFINITY;
            }
            rho /= f;
        }
        if rho.is_nan() {
            f64::INFINITY
        } else {
            rho
        }
    }
}

/// The n-th term computed from its definition.
pub fn term_direct(spec: &SeriesSpec, ctx: &QContext, u: &Scalar, n: usize) -> Result<Scalar> {
    let ni = n as i64;
    let mut value = &u.pow_int(binom2(ni))? * &spec.z.pow_int(ni)?;
    for a in &spec.upper {
        value = &value * &qpoch(a, ctx, n);
    }
    let mut den = qfact(n, ctx);
    for (j, b) in spec.lower.iter().enumerate() {
        let p = qpoch(b, ctx, n);
        if p.is_zero() {
            // the first vanishing factor is at the smallest such index
            let m = (0..n)
                .find(|&m| ctx.is_zero_factor(&(&ctx.one() - &(b * &ctx.q_pow(m as i64)))))
                .unwrap_or(0);
            return Err(Error::LowerParameterPole { index: j + 1, m });
        }
        den = &den * &p;
    }
    let e = spec.excess();
    let sign = if (ni * e).rem_euclid(2) == 0 { 1 } else { -1 };
    let power = &ctx.int(sign) * &ctx.q_pow(binom2(ni) * e);
    Ok(&(&value / &den) * &power)
}

/// Classifies a series: `Some(m)` when it terminates after index `m`,
/// `None` when it converges without terminating (float mode only).
///
/// Non-terminating series must satisfy `g = |u| |q|^(1+s-r) < 1`, or `g = 1`
/// with `|z| < 1`.
pub(crate) fn convergence(spec: &SeriesSpec, ctx: &QContext, u: &Scalar) -> Result<Option<usize>> {
    if spec.z.is_zero() {
        return Ok(Some(0));
    }
    if let Some(m) = spec.terminating_index(ctx) {
        return Ok(Some(m));
    }
    let g = &u.abs() * &ctx.q().abs().pow_int(spec.excess())?;
    let z_abs = spec.z.abs();
    let divergent = match g.try_cmp(&ctx.one())? {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Equal => z_abs.try_cmp(&ctx.one())?.is_ge(),
        std::cmp::Ordering::Less => false,
    };
    if divergent {
        return Err(Error::Divergent(format!(
            "|u| |q|^(1+s-r) = {} with |z| = {}",
            g.to_f64(),
            z_abs.to_f64()
        )));
    }
    if ctx.is_exact() {
        return Err(Error::ExactModeUnsupported(
            "non-terminating series has no exact value".into(),
        ));
    }
    Ok(None)
}

/// `r phi s`.
pub fn phi(spec: &SeriesSpec, ctx: &QContext) -> Result<SeriesResult> {
    dphi_with(spec, ctx, &ctx.one())
}

/// `r Phi s` with the context's deformation `u`.
pub fn dphi(spec: &SeriesSpec, ctx: &QContext) -> Result<SeriesResult> {
    dphi_with(spec, ctx, ctx.u())
}

/// `r Phi s` with an explicit deformation `u`.
///
/// A series with an upper parameter `q^-m` sums exactly `m + 1` terms.
/// Otherwise the series must converge, which requires
/// `g = |u| |q|^(1+s-r) < 1`, or `g = 1` with `|z| < 1`; the sum stops by the
/// context's truncation policy with a proven geometric tail bound. Exact mode
/// accepts terminating series only.
pub fn dphi_with(spec: &SeriesSpec, ctx: &QContext, u: &Scalar) -> Result<SeriesResult> {
    spec.check(ctx)?;
    ctx.check(u)?;
    if spec.z.is_zero() {
        return Ok(SeriesResult::terminating(ctx.one(), 1, ctx.zero()));
    }
    let ops_per_term = DIRECT_EVERY * (spec.upper.len() + spec.lower.len() + 4);
    if let Some(m) = convergence(spec, ctx, u)? {
        let mut terms = Terms::new(spec, ctx, u);
        let mut acc = Accumulator::new(ctx);
        acc.add(&Approx::exact(terms.term.clone()));
        for _ in 0..m {
            terms.advance()?;
            acc.add(&Approx::exact(terms.term.clone()));
        }
        return Ok(SeriesResult::terminating(
            acc.sum().clone(),
            m + 1,
            acc.rounding(ops_per_term),
        ));
    }
    let g = (&u.abs() * &ctx.q().abs().pow_int(spec.excess())?).to_f64();
    let mut terms = Terms::new(spec, ctx, u);
    let mut acc = Accumulator::new(ctx);
    loop {
        let term = Approx::exact(terms.term.clone());
        if let Step::Done { tail } = acc.push(&term, Some(terms.ratio_bound(g)))? {
            return Ok(SeriesResult {
                value: acc.sum().clone(),
                terms_used: acc.terms(),
                terminated: Termination::TailTolerance,
                tail_estimate: Some(tail),
                rounding: acc.rounding(ops_per_term),
            });
        }
        terms.advance()?;
        if terms.term.is_zero() {
            return Ok(SeriesResult::terminating(
                acc.sum().clone(),
                acc.terms(),
                acc.rounding(ops_per_term),
            ));
        }
    }
}

/// The first `count` partial sums, without any stopping rule.
pub fn dphi_partial_sums(
    spec: &SeriesSpec,
    ctx: &QContext,
    u: &Scalar,
    count: usize,
) -> Result<Vec<Scalar>> {
    spec.check(ctx)?;
    ctx.check(u)?;
    let mut terms = Terms::new(spec, ctx, u);
    let mut sums = Vec::with_capacity(count);
    let mut sum = ctx.zero();
    for i in 0..count {
        if i > 0 {
            terms.advance()?;
        }
        sum = &sum + &terms.term;
        sums.push(sum.clone());
    }
    Ok(sums)
}

/// The series cut after `count` terms, reported with `MaxTerms`.
pub fn dphi_truncated(
    spec: &SeriesSpec,
    ctx: &QContext,
    u: &Scalar,
    count: usize,
) -> Result<SeriesResult> {
    let sums = dphi_partial_sums(spec, ctx, u, count)?;
    Ok(SeriesResult {
        value: sums.last().cloned().unwrap_or_else(|| ctx.zero()),
        terms_used: count,
        terminated: Termination::MaxTerms,
        tail_estimate: None,
        rounding: ctx.zero(),
    })
}

/// `D^k` with respect to the first lower parameter `c_1` of `r Phi s`
/// (deformation `ctx.u()`), in closed form:
///
/// `(-1)^(1+s-r) prod(1 - a_i) (q;q)_k z / ((c_1;q)_(k+1) (1-q) prod_(j>=2)(1 - c_j))`
/// `  * (r+1) Phi (s+1) (a_1 q..a_r q, q^(k+1); c_1 q^(k+1), c_2 q..c_s q, q^2; q, u, q^(1+s-r) u z)`.
pub fn dq_param_lower(spec: &SeriesSpec, ctx: &QContext, k: usize) -> Result<SeriesResult> {
    spec.check(ctx)?;
    if spec.lower.is_empty() {
        return Err(Error::DomainError("series has no lower parameter".into()));
    }
    if k == 0 {
        return Err(Error::DomainError("derivative order must be positive".into()));
    }
    let e = spec.excess();
    let u = ctx.u();
    let one = ctx.one();
    let c1 = &spec.lower[0];
    let mut num = &qfact(k, ctx) * &spec.z;
    if e.rem_euclid(2) == 1 {
        num = -num;
    }
    for a in &spec.upper {
        num = &num * &(&one - a);
    }
    let mut den = &qpoch(c1, ctx, k + 1) * &(&one - ctx.q());
    for c in &spec.lower[1..] {
        den = &den * &(&one - c);
    }
    let prefactor = &num * &recip(&den, || format!("(c1;q)_{} prod(1 - c_j)", k + 1))?;

    let mut upper: Vec<Scalar> = spec.upper.iter().map(|a| a * ctx.q()).collect();
    upper.push(ctx.q_pow(k as i64 + 1));
    let mut lower = vec![c1 * &ctx.q_pow(k as i64 + 1)];
    lower.extend(spec.lower[1..].iter().map(|c| c * ctx.q()));
    lower.push(ctx.q_pow(2));
    let z = &(&ctx.q_pow(e) * u) * &spec.z;
    let shifted = SeriesSpec::new(upper, lower, z);
    Ok(dphi(&shifted, ctx)?.scaled(&prefactor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::TruncationPolicy;
    use crate::qcore::inf_ratio;
    use rug::Rational;

    fn ex(p: i64, d: i64) -> QContext {
        QContext::exact(Rational::from((p, d))).unwrap()
    }

    fn fl(p: i64, d: i64) -> QContext {
        QContext::float(Rational::from((p, d)), 128, TruncationPolicy::default()).unwrap()
    }

    #[test]
    fn zero_argument_gives_one() {
        let ctx = ex(1, 2);
        let spec = SeriesSpec::new(vec![ctx.ratio(1, 3)], vec![ctx.ratio(1, 5)], ctx.zero());
        let r = phi(&spec, &ctx).unwrap();
        assert!(r.value.is_one());
        assert_eq!(r.terms_used, 1);
        assert_eq!(r.terminated, Termination::ExactTerminating);
    }

    #[test]
    fn two_term_chu_sum() {
        let ctx = ex(1, 2);
        let spec = SeriesSpec::new(
            vec![ctx.q_pow(-1), ctx.ratio(1, 3)],
            vec![ctx.ratio(1, 5)],
            ctx.q().clone(),
        );
        let r = phi(&spec, &ctx).unwrap();
        assert_eq!(r.value, ctx.ratio(1, 6));
        assert_eq!(r.terms_used, 2);
        assert_eq!(r.tail_estimate, Some(ctx.zero()));
    }

    #[test]
    fn lower_pole_is_reported() {
        let ctx = ex(1, 2);
        let spec = SeriesSpec::new(vec![ctx.q_pow(-4)], vec![ctx.q_pow(-2)], ctx.ratio(1, 3));
        assert_eq!(
            phi(&spec, &ctx),
            Err(Error::LowerParameterPole { index: 1, m: 2 })
        );
    }

    #[test]
    fn exact_mode_rejects_infinite_series() {
        let ctx = ex(1, 2);
        let spec = SeriesSpec::new(vec![ctx.ratio(1, 3)], vec![], ctx.ratio(1, 3));
        assert!(matches!(phi(&spec, &ctx), Err(Error::ExactModeUnsupported(_))));
    }

    #[test]
    fn divergence_is_detected_up_front() {
        let ctx = fl(1, 2);
        // r = s + 2 grows like q^-C(n,2)
        let spec = SeriesSpec::new(
            vec![ctx.ratio(1, 3), ctx.ratio(1, 5), ctx.ratio(1, 7)],
            vec![ctx.ratio(1, 9)],
            ctx.ratio(1, 10),
        );
        assert!(matches!(phi(&spec, &ctx), Err(Error::Divergent(_))));
        let unit = SeriesSpec::new(vec![ctx.ratio(1, 3), ctx.ratio(1, 5)], vec![ctx.ratio(1, 7)], ctx.one());
        assert!(matches!(phi(&unit, &ctx), Err(Error::Divergent(_))));
        let spec = SeriesSpec::new(vec![ctx.ratio(1, 3)], vec![ctx.ratio(1, 5)], ctx.ratio(1, 2));
        assert!(matches!(
            dphi_with(&spec, &ctx, &ctx.int(3)),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn gauss_sum_sample() {
        let ctx = fl(1, 2);
        let (a, b, c) = (ctx.ratio(1, 2), ctx.ratio(1, 3), ctx.ratio(1, 10));
        let z = &c / &(&a * &b);
        let spec = SeriesSpec::new(vec![a.clone(), b.clone()], vec![c.clone()], z.clone());
        let lhs = phi(&spec, &ctx).unwrap();
        assert_eq!(lhs.terminated, Termination::TailTolerance);
        let rhs = inf_ratio(&[&c / &a, &c / &b], &[c.clone(), z], &ctx).unwrap();
        let residual = (&lhs.value - &rhs.value).abs();
        let budget = &(&lhs.error_bound() + &rhs.bound) + &(&rhs.value.abs() * &ctx.from_f64(1e-28));
        assert!(residual.try_cmp(&budget).unwrap().is_le(), "{residual} > {budget}");
    }

    #[test]
    fn unit_deformation_is_the_plain_series() {
        let ctx = fl(1, 3);
        let spec = SeriesSpec::new(vec![ctx.ratio(1, 2), ctx.ratio(2, 3)], vec![ctx.ratio(1, 5)], ctx.ratio(1, 4));
        let plain = phi(&spec, &ctx).unwrap();
        let deformed = dphi(&spec, &ctx).unwrap();
        assert_eq!(plain, deformed);
        for n in 0..12 {
            assert_eq!(
                term_direct(&spec, &ctx, &ctx.one(), n).unwrap(),
                term_direct(&spec, &ctx, ctx.u(), n).unwrap()
            );
        }
    }

    #[test]
    fn deformation_q_with_zero_parameter() {
        // r+1 Phi r (a, 0; b; q, q, z) = r phi r (a; b; q, -z) termwise, r = 2
        let ctx = ex(1, 2);
        let a = vec![ctx.ratio(1, 2), ctx.ratio(1, 3)];
        let b = vec![ctx.ratio(1, 5), ctx.ratio(1, 7)];
        let z = ctx.ratio(1, 4);
        let mut upper = a.clone();
        upper.push(ctx.zero());
        let deformed = SeriesSpec::new(upper, b.clone(), z.clone());
        let plain = SeriesSpec::new(a, b, -&z);
        for n in 0..20 {
            assert_eq!(
                term_direct(&deformed, &ctx, ctx.q(), n).unwrap(),
                term_direct(&plain, &ctx, &ctx.one(), n).unwrap()
            );
        }
    }

    #[test]
    fn recurrence_matches_direct_terms() {
        let ctx = ex(1, 3);
        let spec = SeriesSpec::new(vec![ctx.ratio(1, 2)], vec![], ctx.ratio(2, 3));
        let sums = dphi_partial_sums(&spec, &ctx, &ctx.one(), 30).unwrap();
        let mut running = ctx.zero();
        for (n, s) in sums.iter().enumerate() {
            running = &running + &term_direct(&spec, &ctx, &ctx.one(), n).unwrap();
            assert_eq!(&running, s);
        }
    }

    #[test]
    fn parameter_derivative_vanishes_at_zero_argument() {
        let ctx = ex(1, 2);
        let spec = SeriesSpec::new(vec![ctx.ratio(1, 2)], vec![ctx.ratio(1, 5)], ctx.zero());
        assert!(dq_param_lower(&spec, &ctx, 3).unwrap().value.is_zero());
        let bare = SeriesSpec::new(vec![ctx.ratio(1, 2)], vec![], ctx.ratio(1, 5));
        assert!(matches!(dq_param_lower(&bare, &ctx, 1), Err(Error::DomainError(_))));
    }
}
