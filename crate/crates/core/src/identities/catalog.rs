//! Named identities: each side is an independent evaluation route.

use rug::Rational;

use super::grid::{fracs, ints, Grid, Params};
use super::IdentityCase;
use crate::context::{Mode, QContext};
use crate::error::{Error, Result};
use crate::qcore::{binom2, inf_ratio, qbinom, qfact, qpoch};
use crate::qdiff::{cf_double_ratio_inf, dq_iter_approx, recip, DoubleRatio, FunctionHandle};
use crate::qhyper::{dphi_with, phi, Combination, SeriesResult, SeriesSpec};
use crate::scalar::{Approx, Scalar};

/// One route of an identity.
pub type Side = fn(&Params, &QContext) -> Result<Approx>;

/// An alternative form of an identity, checked in probe mode.
#[derive(Clone, Debug)]
pub struct Variant {
    pub name: &'static str,
    pub description: &'static str,
    pub lhs: Side,
    pub rhs: Side,
}

#[derive(Clone, Debug)]
pub struct Identity {
    pub id: &'static str,
    pub description: &'static str,
    pub default_mode: Mode,
    pub lhs: Side,
    pub rhs: Side,
    /// Structural constraints on grid points (such as `k <= n`).
    pub keep: fn(&Params) -> bool,
    grid: fn() -> Grid,
    pub variants: Vec<Variant>,
}

impl Identity {
    pub fn default_grid(&self) -> Grid {
        (self.grid)()
    }
}

/// Charged per coefficient of the closed-form finite sums.
const COEFF_OPS: usize = 256;

const FLOAT128: Mode = Mode::Float { precision_bits: 128 };

fn all(_: &Params) -> bool {
    true
}

fn k_le_n(p: &Params) -> bool {
    matches!((p.count("k"), p.count("n")), (Ok(k), Ok(n)) if 1 <= k && k <= n)
}

pub fn registry() -> Vec<Identity> {
    vec![
        Identity {
            id: "gauss",
            description: "2phi1(a,b;c;q,c/ab) = (c/a,c/b;q)_inf/(c,c/ab;q)_inf",
            default_mode: FLOAT128,
            lhs: gauss_lhs,
            rhs: gauss_rhs,
            keep: all,
            grid: gauss_grid,
            variants: vec![],
        },
        Identity {
            id: "chu",
            description: "2phi1(q^-n,a;c;q,q) = (c/a;q)_n/(c;q)_n a^n",
            default_mode: Mode::Exact,
            lhs: chu_lhs,
            rhs: chu_rhs,
            keep: all,
            grid: chu_grid,
            variants: vec![],
        },
        Identity {
            id: "jackson",
            description: "2phi1(a,b;c;q,z) = (az;q)_inf/(z;q)_inf 2phi2(a,c/b;c,az;q,bz)",
            default_mode: FLOAT128,
            lhs: jackson_lhs,
            rhs: jackson_rhs,
            keep: all,
            grid: jackson_grid,
            variants: vec![],
        },
        Identity {
            id: "chu-deriv",
            description: "3phi2(q^(1-n),aq,q^(k+1);cq^(k+1),q^2;q,q) as a finite sum, from the c-derivative of the Chu sum",
            default_mode: Mode::Exact,
            lhs: chu_deriv_lhs,
            rhs: chu_deriv_rhs,
            keep: k_le_n,
            grid: chu_deriv_grid,
            variants: vec![Variant {
                name: "printed",
                description: "right side without the factor 1/((1-q^-n)(1-a))",
                lhs: chu_deriv_lhs,
                rhs: chu_deriv_printed_rhs,
            }],
        },
        Identity {
            id: "chu-deriv-a1",
            description: "3phi2(q^(1-n),q,q^(k+1);cq^(k+1),q^2;q,q) = 0 for 1 <= k <= n",
            default_mode: Mode::Exact,
            lhs: chu_deriv_a1_lhs,
            rhs: zero_side,
            keep: k_le_n,
            grid: chu_deriv_a1_grid,
            variants: vec![],
        },
        Identity {
            id: "chu-T",
            description: "the deformed operator applied in c to both sides of the Chu sum",
            default_mode: FLOAT128,
            lhs: chu_t_lhs,
            rhs: chu_t_rhs,
            keep: all,
            grid: chu_t_grid,
            variants: vec![Variant {
                name: "printed",
                description: "right side without the factor a^n",
                lhs: chu_t_lhs,
                rhs: chu_t_printed_rhs,
            }],
        },
        Identity {
            id: "gauss-deriv",
            description: "k-th q-derivative in c of both sides of the q-Gauss sum",
            default_mode: FLOAT128,
            lhs: gauss_deriv_lhs,
            rhs: gauss_deriv_rhs,
            keep: all,
            grid: gauss_deriv_grid,
            variants: vec![
                Variant {
                    name: "printed-i",
                    description: "printed 4phi3 sum with (1/ab)^n read as (1/ab)^i",
                    lhs: gauss_deriv_printed_lhs,
                    rhs: gauss_deriv_rhs,
                },
                Variant {
                    name: "reindexed",
                    description: "3phi2 sum with the i = 0 term shifted separately",
                    lhs: gauss_deriv_reindexed_lhs,
                    rhs: gauss_deriv_rhs,
                },
            ],
        },
        Identity {
            id: "jackson-deriv",
            description: "3phi2(aq,bq,q^(k+1);cq^(k+1),q^2;q,z) as a finite sum of 3phi3 series, from the c-derivative of Jackson's transformation",
            default_mode: FLOAT128,
            lhs: jackson_deriv_lhs,
            rhs: jackson_deriv_rhs,
            keep: all,
            grid: jackson_deriv_grid,
            variants: vec![
                Variant {
                    name: "printed",
                    description: "printed finite sum of 4phi4 series",
                    lhs: jackson_deriv_lhs,
                    rhs: jackson_deriv_printed_rhs,
                },
                Variant {
                    name: "derivative",
                    description: "lattice derivatives in c of both sides of Jackson's transformation",
                    lhs: jackson_deriv_lattice_lhs,
                    rhs: jackson_deriv_lattice_rhs,
                },
            ],
        },
    ]
}

pub fn lookup(id: &str) -> Option<Identity> {
    registry().into_iter().find(|i| i.id == id)
}

// ---- grids ----

fn gauss_grid() -> Grid {
    Grid::new().block(&[
        ("a", &fracs(&[(1, 2), (2, 3)])),
        ("b", &fracs(&[(1, 3), (2, 5)])),
        ("c", &fracs(&[(1, 10), (1, 20)])),
        ("q", &fracs(&[(1, 2), (1, 3)])),
    ])
}

const CHU_A: [(i64, i64); 5] = [(1, 2), (-1, 2), (1, 3), (2, 3), (-3, 2)];
const CHU_C: [(i64, i64); 3] = [(1, 5), (7, 3), (-1, 2)];
const CHU_Q: [(i64, i64); 3] = [(1, 2), (1, 3), (2, 5)];

fn chu_grid() -> Grid {
    Grid::new().block(&[
        ("n", &ints(0, 12)),
        ("a", &fracs(&CHU_A)),
        ("c", &fracs(&CHU_C)),
        ("q", &fracs(&CHU_Q)),
    ])
}

fn chu_deriv_grid() -> Grid {
    Grid::new().block(&[
        ("k", &ints(1, 8)),
        ("n", &ints(1, 8)),
        ("a", &fracs(&CHU_A)),
        ("c", &fracs(&CHU_C)),
        ("q", &fracs(&CHU_Q)),
    ])
}

fn chu_deriv_a1_grid() -> Grid {
    Grid::new().block(&[
        ("k", &ints(1, 6)),
        ("n", &ints(1, 6)),
        ("c", &fracs(&CHU_C)),
        ("q", &fracs(&CHU_Q)),
    ])
}

fn jackson_grid() -> Grid {
    Grid::new()
        .block(&[
            ("a", &fracs(&[(1, 2), (1, 3)])),
            ("b", &fracs(&[(1, 3), (2, 5)])),
            ("c", &fracs(&[(1, 7), (1, 5)])),
            ("z", &fracs(&[(1, 5), (1, 4)])),
            ("q", &fracs(&[(1, 2), (1, 3)])),
        ])
        // b = q^-2 terminates the left side
        .block(&[
            ("a", &fracs(&[(1, 2)])),
            ("b", &ints(4, 4)),
            ("c", &fracs(&[(1, 5)])),
            ("z", &fracs(&[(1, 4)])),
            ("q", &fracs(&[(1, 2)])),
        ])
}

fn chu_t_grid() -> Grid {
    Grid::new().block(&[
        ("n", &ints(0, 2)),
        ("a", &fracs(&[(1, 3), (1, 2)])),
        ("c", &fracs(&[(1, 5), (1, 7)])),
        ("y", &fracs(&[(1, 4), (-1, 5)])),
        ("u", &fracs(&[(1, 1), (1, 2), (1, 3)])),
        ("q", &fracs(&[(1, 2), (1, 3)])),
    ])
}

fn gauss_deriv_grid() -> Grid {
    Grid::new()
        .block(&[
            ("k", &ints(1, 2)),
            ("a", &fracs(&[(1, 2), (2, 3)])),
            ("b", &fracs(&[(1, 3), (2, 5)])),
            ("c", &fracs(&[(1, 10), (1, 20)])),
            ("q", &fracs(&[(1, 2), (1, 3)])),
        ])
        .block(&[
            ("k", &ints(2, 2)),
            ("a", &fracs(&[(2, 3)])),
            ("b", &fracs(&[(1, 5)])),
            ("c", &fracs(&[(1, 20)])),
            ("q", &fracs(&[(1, 3)])),
        ])
}

fn jackson_deriv_grid() -> Grid {
    Grid::new().block(&[
        ("k", &ints(1, 2)),
        ("a", &fracs(&[(1, 2), (1, 3)])),
        ("b", &fracs(&[(1, 3), (2, 5)])),
        ("c", &fracs(&[(1, 7), (1, 10)])),
        ("z", &fracs(&[(1, 5), (1, 4)])),
        ("q", &fracs(&[(1, 2), (1, 3)])),
    ])
}

// ---- helpers ----

fn series(upper: Vec<Scalar>, lower: Vec<Scalar>, z: Scalar, ctx: &QContext) -> Result<SeriesResult> {
    phi(&SeriesSpec::new(upper, lower, z), ctx)
}

/// `1Phi1(q^m; lower; q, u/q, w)`.
fn phi11(m: usize, lower: Scalar, w: Scalar, u: &Scalar, ctx: &QContext) -> Result<SeriesResult> {
    let spec = SeriesSpec::new(vec![ctx.q_pow(m as i64)], vec![lower], w);
    dphi_with(&spec, ctx, &(u / ctx.q()))
}

fn unit(ctx: &QContext) -> SeriesResult {
    SeriesResult {
        value: ctx.one(),
        terms_used: 1,
        terminated: crate::qhyper::Termination::ExactTerminating,
        tail_estimate: Some(ctx.zero()),
        rounding: ctx.zero(),
    }
}

fn inv(x: &Scalar, label: &str) -> Result<Scalar> {
    recip(x, || label.to_string())
}

fn zero_side(_: &Params, ctx: &QContext) -> Result<Approx> {
    Ok(Approx::exact(ctx.zero()))
}

/// Product of an exactly known prefactor and an accumulated sum.
fn scaled(prefactor: &Scalar, sum: Combination, ctx: &QContext) -> Approx {
    let mut total = Combination::new(ctx);
    total.add(prefactor, &sum.finish(ctx, COEFF_OPS));
    total.finish(ctx, COEFF_OPS).approx()
}

/// A function of `c` evaluated through a fresh context at the lattice
/// precision, for the lattice derivative routes.
fn in_c(p: &Params, f: fn(&Params, &Scalar, &QContext) -> Result<Approx>) -> FunctionHandle {
    let p = p.clone();
    FunctionHandle::new(move |c, ctx| f(&p, c, ctx))
}

// ---- q-Gauss ----

fn gauss_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let (a, b, c) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?);
    let z = &c / &(&a * &b);
    Ok(series(vec![a, b], vec![c], z, ctx)?.approx())
}

fn gauss_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let (a, b, c) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?);
    let cab = &c / &(&a * &b);
    inf_ratio(&[&c / &a, &c / &b], &[c, cab], ctx)
}

// ---- q-Chu-Vandermonde ----

fn chu_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let n = p.count("n")? as i64;
    let (a, c) = (p.get("a", ctx)?, p.get("c", ctx)?);
    Ok(series(vec![ctx.q_pow(-n), a], vec![c], ctx.q().clone(), ctx)?.approx())
}

fn chu_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let n = p.count("n")?;
    let (a, c) = (p.get("a", ctx)?, p.get("c", ctx)?);
    let den = inv(&qpoch(&c, ctx, n), "(c;q)_n")?;
    let value = &(&qpoch(&(&c / &a), ctx, n) * &den) * &a.pow_int(n as i64)?;
    let mut sum = Combination::new(ctx);
    sum.add(&value, &unit(ctx));
    Ok(sum.finish(ctx, COEFF_OPS).approx())
}

// ---- Jackson ----

fn jackson_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let (a, b, c, z) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?, p.get("z", ctx)?);
    Ok(series(vec![a, b], vec![c], z, ctx)?.approx())
}

fn jackson_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let (a, b, c, z) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?, p.get("z", ctx)?);
    let az = &a * &z;
    let ratio = inf_ratio(&[az.clone()], &[z.clone()], ctx)?;
    let s = series(vec![a, &c / &b], vec![c, az], &b * &z, ctx)?;
    Ok(ratio.mul(&s.approx()))
}

// ---- derivative of the Chu sum ----

fn chu_deriv_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let (k, n) = (p.count("k")? as i64, p.count("n")? as i64);
    let (a, c) = (p.get("a", ctx)?, p.get("c", ctx)?);
    let q = ctx.q();
    let upper = vec![ctx.q_pow(1 - n), &a * q, ctx.q_pow(k + 1)];
    let lower = vec![&c * &ctx.q_pow(k + 1), ctx.q_pow(2)];
    Ok(series(upper, lower, q.clone(), ctx)?.approx())
}

/// `sum_i [k,i] q^C(i,2) (-1/a)^i (c;q)_i (q^n;q)_(k-i) (c q^i/a;q)_(n-i) / (q;q)_(n-i)`.
fn chu_deriv_sum(k: usize, n: usize, a: &Scalar, c: &Scalar, ctx: &QContext) -> Result<Combination> {
    let mut sum = Combination::new(ctx);
    let neg_inv_a = -&inv(a, "a")?;
    for i in 0..=k {
        let ii = i as i64;
        let qi = ctx.q_pow(ii);
        let t = &(&(&qbinom(k, ii, ctx) * &ctx.q_pow(binom2(ii))) * &neg_inv_a.pow_int(ii)?)
            * &(&qpoch(c, ctx, i) * &qpoch(&ctx.q_pow(n as i64), ctx, k - i));
        let t = &(&t * &qpoch(&(&(c * &qi) / a), ctx, n - i)) / &qfact(n - i, ctx);
        sum.add(&t, &unit(ctx));
    }
    Ok(sum)
}

/// `a^n (1-q) (q;q)_n (c;q)_(k+1) / (q (q;q)_k (c;q)_(n+k))`, the printed
/// prefactor with `(c/a;q)_n / (c/a;q)_i` folded into the sum.
fn chu_deriv_printed_prefactor(k: usize, n: usize, a: &Scalar, c: &Scalar, ctx: &QContext) -> Result<Scalar> {
    let one = ctx.one();
    let num = &(&(&a.pow_int(n as i64)? * &(&one - ctx.q())) * &qfact(n, ctx)) * &qpoch(c, ctx, k + 1);
    let den = &(ctx.q() * &qfact(k, ctx)) * &qpoch(c, ctx, n + k);
    Ok(&num * &inv(&den, "(c;q)_(n+k)")?)
}

fn chu_deriv_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let (k, n) = (p.count("k")?, p.count("n")?);
    let (a, c) = (p.get("a", ctx)?, p.get("c", ctx)?);
    let one = ctx.one();
    let printed = chu_deriv_printed_prefactor(k, n, &a, &c, ctx)?;
    let extra = &(&one - &ctx.q_pow(-(n as i64))) * &(&one - &a);
    let pre = &printed * &inv(&extra, "(1-q^-n)(1-a)")?;
    Ok(scaled(&pre, chu_deriv_sum(k, n, &a, &c, ctx)?, ctx))
}

fn chu_deriv_printed_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let (k, n) = (p.count("k")?, p.count("n")?);
    let (a, c) = (p.get("a", ctx)?, p.get("c", ctx)?);
    let pre = chu_deriv_printed_prefactor(k, n, &a, &c, ctx)?;
    Ok(scaled(&pre, chu_deriv_sum(k, n, &a, &c, ctx)?, ctx))
}

fn chu_deriv_a1_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let (k, n) = (p.count("k")? as i64, p.count("n")? as i64);
    let c = p.get("c", ctx)?;
    let upper = vec![ctx.q_pow(1 - n), ctx.q().clone(), ctx.q_pow(k + 1)];
    let lower = vec![&c * &ctx.q_pow(k + 1), ctx.q_pow(2)];
    Ok(series(upper, lower, ctx.q().clone(), ctx)?.approx())
}

// ---- deformed operator on the Chu sum ----

fn chu_t_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let n = p.count("n")?;
    let (a, c, y, u) = (p.get("a", ctx)?, p.get("c", ctx)?, p.get("y", ctx)?, p.get("u", ctx)?);
    let qmn = ctx.q_pow(-(n as i64));
    let mut sum = Combination::new(ctx);
    for k in 0..=n {
        let qk = ctx.q_pow(k as i64);
        let num = &(&qpoch(&qmn, ctx, k) * &qpoch(&a, ctx, k)) * &qk;
        let den = &qpoch(&c, ctx, k) * &qfact(k, ctx);
        let coeff = &num * &inv(&den, "(c;q)_k")?;
        sum.add(&coeff, &phi11(k, &c * &qk, -&y, &u, ctx)?);
    }
    Ok(sum.finish(ctx, COEFF_OPS).approx())
}

/// `sum_i (uq)^C(i,2) [n,i] (-y/a)^i (c q^i/a;q)_(n-i) / ((c q^i;q)_(n-i) (q^n c;q)_i)
///  * 1Phi1(q^n; q^(n+i) c; q, u/q, -u^i y)`.
fn chu_t_sum(p: &Params, ctx: &QContext) -> Result<(Combination, Scalar)> {
    let n = p.count("n")?;
    let (a, c, y, u) = (p.get("a", ctx)?, p.get("c", ctx)?, p.get("y", ctx)?, p.get("u", ctx)?);
    let uq = &u * ctx.q();
    let ya = -&(&y * &inv(&a, "a")?);
    let qn = ctx.q_pow(n as i64);
    let mut sum = Combination::new(ctx);
    for i in 0..=n {
        let ii = i as i64;
        let qi = ctx.q_pow(ii);
        let num = &(&(&uq.pow_int(binom2(ii))? * &qbinom(n, ii, ctx)) * &ya.pow_int(ii)?)
            * &qpoch(&(&(&c * &qi) / &a), ctx, n - i);
        let den = &qpoch(&(&c * &qi), ctx, n - i) * &qpoch(&(&qn * &c), ctx, i);
        let coeff = &num * &inv(&den, "(c;q)_(n+i)")?;
        let w = -&(&u.pow_int(ii)? * &y);
        sum.add(&coeff, &phi11(n, &c * &ctx.q_pow((n + i) as i64), w, &u, ctx)?);
    }
    Ok((sum, a.pow_int(n as i64)?))
}

fn chu_t_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let (sum, an) = chu_t_sum(p, ctx)?;
    Ok(scaled(&an, sum, ctx))
}

fn chu_t_printed_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let (sum, _) = chu_t_sum(p, ctx)?;
    Ok(sum.finish(ctx, COEFF_OPS).approx())
}

// ---- derivative of the q-Gauss sum ----

fn gauss_in_c(p: &Params, c: &Scalar, ctx: &QContext) -> Result<Approx> {
    let (a, b) = (p.get("a", ctx)?, p.get("b", ctx)?);
    let z = c / &(&a * &b);
    Ok(series(vec![a, b], vec![c.clone()], z, ctx)?.approx())
}

fn gauss_deriv_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let k = p.count("k")?;
    dq_iter_approx(&in_c(p, gauss_in_c), ctx, k, &p.get("c", ctx)?)
}

fn gauss_deriv_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let k = p.count("k")?;
    let (a, b, c) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?);
    let one = ctx.one();
    let ratio = DoubleRatio::new(&one / &a, &one / &b, one.clone(), &one / &(&a * &b));
    cf_double_ratio_inf(&ratio, ctx, k, &c)
}

fn gauss_deriv_printed_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let k = p.count("k")?;
    let (a, b, c) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?);
    let one = ctx.one();
    let q = ctx.q();
    let ab = &a * &b;
    let z = &c / &ab;
    let inv_ab = inv(&ab, "ab")?;
    let cqk = &c * &ctx.q_pow(k as i64);
    let mut sum = Combination::new(ctx);
    for i in 0..=k {
        let ii = i as i64;
        let qi = ctx.q_pow(ii);
        let num = &(&(&qbinom(k, ii, ctx) * &(&one - &(&a * &qi))) * &(&one - &(&b * &qi)))
            * &(&(&qpoch(&c, ctx, i) * &qpoch(&a, ctx, i)) * &qpoch(&b, ctx, i));
        let den = &(&(&one - &(&c * &ctx.q_pow(k as i64 + 1))) * &qpoch(&cqk, ctx, i)) * &qfact(i, ctx);
        let coeff = &(&num * &inv(&den, "(cq^k;q)_i")?) * &inv_ab.pow_int(ii)?;
        let qi1 = &qi * q;
        let upper = vec![&a * &qi1, &b * &qi1, ctx.q_pow(k as i64 + 1), q.clone()];
        let lower = vec![&cqk * &qi1, qi1.clone(), ctx.q_pow(2)];
        sum.add(&coeff, &series(upper, lower, z.clone(), ctx)?);
    }
    let pre = &qfact(k, ctx) * &inv(&(&(&one - q) * &qpoch(&c, ctx, k)), "(c;q)_k")?;
    Ok(scaled(&pre, sum, ctx))
}

fn gauss_deriv_reindexed_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let k = p.count("k")?;
    let (a, b, c) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?);
    let one = ctx.one();
    let q = ctx.q();
    let ab = &a * &b;
    let z = &c / &ab;
    let inv_ab = inv(&ab, "ab")?;
    let kk = k as i64;
    let cqk = &c * &ctx.q_pow(kk);
    let mut sum = Combination::new(ctx);
    for i in 0..=k {
        let ii = i as i64;
        let qi = ctx.q_pow(ii);
        let num = &(&qbinom(k, ii, ctx) * &qpoch(&c, ctx, i)) * &(&qpoch(&a, ctx, i) * &qpoch(&b, ctx, i));
        let coeff = &(&num * &inv(&qpoch(&cqk, ctx, i), "(cq^k;q)_i")?) * &inv_ab.pow_int(ii)?;
        let (coeff, inner) = if i == 0 {
            let shift = &(&(&(&one - &a) * &(&one - &b)) * &z) * &qfact(k, ctx);
            let den = &(&one - &cqk) * &(&one - q);
            let upper = vec![&a * q, &b * q, ctx.q_pow(kk + 1)];
            let lower = vec![&c * &ctx.q_pow(kk + 1), ctx.q_pow(2)];
            (&coeff * &(&shift * &inv(&den, "1-cq^k")?), series(upper, lower, z.clone(), ctx)?)
        } else {
            let upper = vec![&a * &qi, &b * &qi, ctx.q_pow(kk)];
            let lower = vec![&cqk * &qi, qi.clone()];
            (&coeff * &qpoch(&qi, ctx, k - i), series(upper, lower, z.clone(), ctx)?)
        };
        sum.add(&coeff, &inner);
    }
    let pre = inv(&qpoch(&c, ctx, k), "(c;q)_k")?;
    Ok(scaled(&pre, sum, ctx))
}

// ---- derivative of Jackson's transformation ----

fn jackson_deriv_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let k = p.count("k")? as i64;
    let (a, b, c, z) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?, p.get("z", ctx)?);
    let q = ctx.q();
    let upper = vec![&a * q, &b * q, ctx.q_pow(k + 1)];
    let lower = vec![&c * &ctx.q_pow(k + 1), ctx.q_pow(2)];
    Ok(series(upper, lower, z, ctx)?.approx())
}

/// `(az;q)_inf / (z;q)_inf` with its bound.
fn jackson_ratio(a: &Scalar, z: &Scalar, ctx: &QContext) -> Result<Approx> {
    inf_ratio(&[a * z], &[z.clone()], ctx)
}

fn jackson_deriv_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let k = p.count("k")?;
    let kk = k as i64;
    let (a, b, c, z) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?, p.get("z", ctx)?);
    let one = ctx.one();
    let q = ctx.q();
    let az = &a * &z;
    let cb = &c / &b;
    let cqk = &c * &ctx.q_pow(kk);
    let bz = &b * &z;
    let mut sum = Combination::new(ctx);
    for i in 0..=k {
        let ii = i as i64;
        let qi = ctx.q_pow(ii);
        let num = &(&(&qbinom(k, ii, ctx) * &ctx.q_pow(2 * binom2(ii))) * &(&qpoch(&a, ctx, i) * &qpoch(&c, ctx, i)))
            * &z.pow_int(ii)?;
        let den = &qpoch(&az, ctx, i) * &qpoch(&cqk, ctx, i);
        let coeff = &num * &inv(&den, "(az, cq^k;q)_i")?;
        let (coeff, inner) = if i == 0 {
            let shift = &(&(&(&(&bz * &(&one - &a)) * &(&one - &cb)) * &qfact(k, ctx)) * &ctx.int(-1)) * &one;
            let den = &(&(&one - &az) * &(&one - &cqk)) * &(&one - q);
            let upper = vec![&a * q, &cb * q, ctx.q_pow(kk + 1)];
            let lower = vec![&az * q, &c * &ctx.q_pow(kk + 1), ctx.q_pow(2)];
            (&coeff * &(&shift * &inv(&den, "(1-az)(1-cq^k)")?), series(upper, lower, &bz * q, ctx)?)
        } else {
            let upper = vec![&a * &qi, &cb * &qi, ctx.q_pow(kk)];
            let lower = vec![&az * &qi, &cqk * &qi, qi.clone()];
            (&coeff * &qpoch(&qi, ctx, k - i), series(upper, lower, &bz * &qi, ctx)?)
        };
        sum.add(&coeff, &inner);
    }
    let num = &(&one - &cqk) * &(&one - q);
    let den = &(&(&(&one - &a) * &(&one - &b)) * &qfact(k, ctx)) * &z;
    let pre = &num * &inv(&den, "(1-a)(1-b) z")?;
    Ok(jackson_ratio(&a, &z, ctx)?.mul(&scaled(&pre, sum, ctx)))
}

fn jackson_deriv_printed_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let k = p.count("k")?;
    let kk = k as i64;
    let (a, b, c, z) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?, p.get("z", ctx)?);
    let one = ctx.one();
    let q = ctx.q();
    let az = &a * &z;
    let cb = &c / &b;
    let cqk = &c * &ctx.q_pow(kk);
    let qz = q * &z;
    let mut sum = Combination::new(ctx);
    for i in 0..=k {
        let ii = i as i64;
        let qi = ctx.q_pow(ii);
        let qi1 = &qi * q;
        let lin = &(&(&one - &(&a * &qi)) * &(&one - &(&cb * &qi))) * &(&one - &qi1);
        let num = &(&(&qbinom(k, ii, ctx) * &ctx.q_pow(2 * binom2(ii))) * &lin)
            * &(&(&qpoch(&a, ctx, i) * &qpoch(&c, ctx, i)) * &qz.pow_int(ii)?);
        let den = &(&(&one - &(&az * &qi)) * &(&one - &(&cqk * &qi))) * &(&qpoch(&az, ctx, i) * &qpoch(&cqk, ctx, i));
        let coeff = &num * &inv(&den, "(az, cq^k;q)_(i+1)")?;
        let upper = vec![&a * &qi1, &cb * &qi1, &qi1 * q, ctx.q_pow(kk + 1)];
        let lower = vec![&az * &qi1, &cqk * &qi1, ctx.q_pow(2), qi1.clone()];
        sum.add(&coeff, &series(upper, lower, &(&qi1 * &b) * &z, ctx)?);
    }
    let num = -&(&b * &(&one - &cqk));
    let den = &(&one - &a) * &(&one - &b);
    let pre = &num * &inv(&den, "(1-a)(1-b)")?;
    Ok(jackson_ratio(&a, &z, ctx)?.mul(&scaled(&pre, sum, ctx)))
}

/// `(1-a)(1-b)(q;q)_k z / ((c;q)_(k+1) (1-q))`, the factor relating the
/// c-derivative of the 2phi1 to the 3phi2.
fn jackson_deriv_factor(p: &Params, ctx: &QContext) -> Result<Scalar> {
    let k = p.count("k")?;
    let (a, b, c, z) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("c", ctx)?, p.get("z", ctx)?);
    let one = ctx.one();
    let num = &(&(&(&one - &a) * &(&one - &b)) * &qfact(k, ctx)) * &z;
    let den = &qpoch(&c, ctx, k + 1) * &(&one - ctx.q());
    Ok(&num * &inv(&den, "(c;q)_(k+1)")?)
}

fn jackson_2phi1_in_c(p: &Params, c: &Scalar, ctx: &QContext) -> Result<Approx> {
    let (a, b, z) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("z", ctx)?);
    Ok(series(vec![a, b], vec![c.clone()], z, ctx)?.approx())
}

fn jackson_2phi2_in_c(p: &Params, c: &Scalar, ctx: &QContext) -> Result<Approx> {
    let (a, b, z) = (p.get("a", ctx)?, p.get("b", ctx)?, p.get("z", ctx)?);
    let az = &a * &z;
    Ok(series(vec![a, c / &b], vec![c.clone(), az], &b * &z, ctx)?.approx())
}

fn jackson_deriv_lattice_lhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let k = p.count("k")?;
    let d = dq_iter_approx(&in_c(p, jackson_2phi1_in_c), ctx, k, &p.get("c", ctx)?)?;
    Ok(d.scale(&inv(&jackson_deriv_factor(p, ctx)?, "derivative factor")?))
}

fn jackson_deriv_lattice_rhs(p: &Params, ctx: &QContext) -> Result<Approx> {
    let k = p.count("k")?;
    let (a, z) = (p.get("a", ctx)?, p.get("z", ctx)?);
    let d = dq_iter_approx(&in_c(p, jackson_2phi2_in_c), ctx, k, &p.get("c", ctx)?)?;
    let d = d.scale(&inv(&jackson_deriv_factor(p, ctx)?, "derivative factor")?);
    Ok(jackson_ratio(&a, &z, ctx)?.mul(&d))
}

// ---- single-case entry points ----

fn exact_value(s: &Scalar) -> Result<Rational> {
    match s {
        Scalar::Exact(r) => Ok(r.clone()),
        Scalar::Float(f) => f
            .to_rational()
            .ok_or_else(|| Error::DomainError(format!("non-finite parameter {s}"))),
    }
}

fn single(id: &str, named: &[(&str, &Scalar)], ints_: &[(&str, usize)], ctx: &QContext) -> Result<IdentityCase> {
    let identity = lookup(id).ok_or_else(|| Error::DomainError(format!("unknown identity {id}")))?;
    let mut p = Params::new().with("q", exact_value(ctx.q())?);
    for (name, v) in named {
        ctx.check(v)?;
        p.set(name, exact_value(v)?);
    }
    for (name, v) in ints_ {
        p.set(name, Rational::from(*v));
    }
    if !(identity.keep)(&p) {
        return Err(Error::DomainError(format!("{id}: parameters outside the identity's range")));
    }
    let lhs = (identity.lhs)(&p, ctx)?;
    let rhs = (identity.rhs)(&p, ctx)?;
    Ok(IdentityCase::new(id, &p, ctx, lhs, rhs))
}

pub fn verify_q_gauss(a: &Scalar, b: &Scalar, c: &Scalar, ctx: &QContext) -> Result<IdentityCase> {
    single("gauss", &[("a", a), ("b", b), ("c", c)], &[], ctx)
}

pub fn verify_chu(n: usize, a: &Scalar, c: &Scalar, ctx: &QContext) -> Result<IdentityCase> {
    single("chu", &[("a", a), ("c", c)], &[("n", n)], ctx)
}

pub fn verify_jackson(a: &Scalar, b: &Scalar, c: &Scalar, z: &Scalar, ctx: &QContext) -> Result<IdentityCase> {
    single("jackson", &[("a", a), ("b", b), ("c", c), ("z", z)], &[], ctx)
}

pub fn verify_s5_chu_deriv(k: usize, n: usize, a: &Scalar, c: &Scalar, ctx: &QContext) -> Result<IdentityCase> {
    if k > n {
        return Err(Error::DomainError(format!("k = {k} exceeds n = {n}")));
    }
    single("chu-deriv", &[("a", a), ("c", c)], &[("k", k), ("n", n)], ctx)
}

/// The `a = 1` specialisation: the left side against zero.
pub fn verify_chu_deriv_a1(k: usize, n: usize, c: &Scalar, ctx: &QContext) -> Result<IdentityCase> {
    single("chu-deriv-a1", &[("c", c)], &[("k", k), ("n", n)], ctx)
}

#[allow(non_snake_case)]
pub fn verify_s5_chu_T(n: usize, a: &Scalar, c: &Scalar, y: &Scalar, u: &Scalar, ctx: &QContext) -> Result<IdentityCase> {
    single("chu-T", &[("a", a), ("c", c), ("y", y), ("u", u)], &[("n", n)], ctx)
}

pub fn verify_s5_gauss_deriv(k: usize, a: &Scalar, b: &Scalar, c: &Scalar, ctx: &QContext) -> Result<IdentityCase> {
    single("gauss-deriv", &[("a", a), ("b", b), ("c", c)], &[("k", k)], ctx)
}

pub fn verify_s5_jackson_deriv(
    k: usize,
    a: &Scalar,
    b: &Scalar,
    z: &Scalar,
    c: &Scalar,
    ctx: &QContext,
) -> Result<IdentityCase> {
    single("jackson-deriv", &[("a", a), ("b", b), ("c", c), ("z", z)], &[("k", k)], ctx)
}
