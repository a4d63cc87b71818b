//! Two-route identity checking over parameter grids.
//!
//! An identity is a pair of evaluators `lhs(params, ctx)` and
//! `rhs(params, ctx)` that each return a value with an error bound. The
//! harness evaluates both on every grid point, skips points that hit a pole,
//! and classifies the residuals.

mod catalog;
mod grid;

use std::collections::BTreeMap;

use rayon::prelude::*;
use rug::Rational;

use crate::context::{Mode, QContext, TruncationPolicy};
use crate::error::{Error, Result};
use crate::scalar::{Approx, Scalar};

pub use catalog::{Side, 
    lookup, registry, verify_chu, verify_chu_deriv_a1, verify_jackson, verify_q_gauss,
    verify_s5_chu_T, verify_s5_chu_deriv, verify_s5_gauss_deriv, verify_s5_jackson_deriv,
    Identity, Variant,
};
pub use grid::{Grid, Params};

/// Residual multiple of the budget up to which a float case counts as
/// verified.
pub const VERIFIED_FACTOR: i64 = 100;
/// Residual multiple of the budget beyond which a float case is a violation.
pub const VIOLATED_FACTOR: i64 = 10_000;
/// Ulps of `max(|lhs|, |rhs|)` added to every float budget for rounding the
/// routes do not track individually.
pub const BUDGET_FLOOR_ULPS: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Verified,
    Inconclusive,
    Violated,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Verified => "Verified",
            Status::Inconclusive => "Inconclusive",
            Status::Violated => "Violated",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCase {
    pub identity_id: String,
    pub params: BTreeMap<String, Scalar>,
    pub lhs: Scalar,
    pub rhs: Scalar,
    /// `|lhs - rhs|`.
    pub residual: Scalar,
    pub mode: Mode,
    /// Combined error bound of both routes; absent in exact mode.
    pub tail_budget: Option<Scalar>,
}

impl IdentityCase {
    /// Builds a case from the two routes. `rhs` must already carry any
    /// injected perturbation.
    pub fn new(identity_id: &str, params: &Params, ctx: &QContext, lhs: Approx, rhs: Approx) -> Self {
        let residual = (&lhs.value - &rhs.value).abs();
        let tail_budget = ctx.precision().map(|_| {
            let ulps = &ctx.eps() * &ctx.int(1i64 << BUDGET_FLOOR_ULPS);
            let floor = &lhs.value.max_abs(&rhs.value) * &ulps;
            &(&lhs.bound + &rhs.bound) + &floor
        });
        IdentityCase {
            identity_id: identity_id.to_string(),
            params: params.to_scalars(),
            lhs: lhs.value,
            rhs: rhs.value,
            residual,
            mode: ctx.mode(),
            tail_budget,
        }
    }

    pub fn status(&self) -> Status {
        match &self.tail_budget {
            None => {
                if self.residual.is_zero() {
                    Status::Verified
                } else {
                    Status::Violated
                }
            }
            Some(budget) => {
                let within = |factor: i64| {
                    let limit = budget * &budget.int_like(factor);
                    self.residual.try_cmp(&limit).map(|o| o.is_le()).unwrap_or(false)
                };
                if within(VERIFIED_FACTOR) {
                    Status::Verified
                } else if within(VIOLATED_FACTOR) {
                    Status::Inconclusive
                } else {
                    Status::Violated
                }
            }
        }
    }
}

/// A grid point whose evaluation failed for a reason other than a pole.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseFailure {
    pub params: BTreeMap<String, Scalar>,
    pub error: Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub identity_id: String,
    pub mode: Mode,
    pub cases: Vec<IdentityCase>,
    pub failures: Vec<CaseFailure>,
    pub max_residual: Scalar,
    pub status: Status,
    pub skipped_poles: usize,
}

impl IdentityReport {
    pub fn precision_bits(&self) -> Option<u32> {
        match self.mode {
            Mode::Exact => None,
            Mode::Float { precision_bits } => Some(precision_bits),
        }
    }
}

/// How grid points are evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckSettings {
    pub mode: Mode,
    pub truncation: TruncationPolicy,
    /// Multiply every right-hand side by `1 + q^10`.
    pub perturb: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl CheckSettings {
    pub fn new(mode: Mode) -> Self {
        CheckSettings {
            mode,
            truncation: TruncationPolicy::default(),
            perturb: false,
            threads: None,
        }
    }

    pub fn exact() -> Self {
        CheckSettings::new(Mode::Exact)
    }

    pub fn float(precision_bits: u32) -> Self {
        CheckSettings::new(Mode::Float { precision_bits })
    }

    /// The context for one grid point; `q` is taken from the point.
    pub fn context(&self, params: &Params) -> Result<QContext> {
        let q = params.rational("q")?;
        QContext::new(q.clone(), self.mode, self.truncation.clone())
    }
}

/// `rhs * (1 + q^10)`: a relative change far above any truncation budget.
pub fn perturbed(rhs: Approx, ctx: &QContext) -> Approx {
    rhs.scale(&(&ctx.one() + &ctx.q_pow(10)))
}

enum Outcome {
    Case(IdentityCase),
    Pole,
    Failed(CaseFailure),
}

fn evaluate_point<L, R>(id: &str, lhs: &L, rhs: &R, point: &Params, settings: &CheckSettings) -> Outcome
where
    L: Fn(&Params, &QContext) -> Result<Approx>,
    R: Fn(&Params, &QContext) -> Result<Approx>,
{
    let attempt = || -> Result<IdentityCase> {
        let ctx = settings.context(point)?;
        let l = lhs(point, &ctx)?;
        let mut r = rhs(point, &ctx)?;
        if settings.perturb {
            r = perturbed(r, &ctx);
        }
        Ok(IdentityCase::new(id, point, &ctx, l, r))
    };
    match attempt() {
        Ok(case) => Outcome::Case(case),
        Err(e) if e.is_pole() => Outcome::Pole,
        Err(error) => Outcome::Failed(CaseFailure {
            params: point.to_scalars(),
            error,
        }),
    }
}

/// Evaluates both routes on every point of `grid` that satisfies `keep`.
///
/// Points where either route meets a pole are skipped and counted. Other
/// errors are recorded as failures and make the report inconclusive unless
/// some case is a violation. Cases come out in canonical parameter order
/// whatever the thread count.
pub fn check_identity<L, R>(
    id: &str,
    lhs: L,
    rhs: R,
    grid: &Grid,
    keep: impl Fn(&Params) -> bool,
    settings: &CheckSettings,
) -> Result<IdentityReport>
where
    L: Fn(&Params, &QContext) -> Result<Approx> + Sync,
    R: Fn(&Params, &QContext) -> Result<Approx> + Sync,
{
    let mut points: Vec<Params> = grid.points()?.into_iter().filter(|p| keep(p)).collect();
    points.sort();
    points.dedup();
    let run = || -> Vec<Outcome> {
        points
            .par_iter()
            .map(|p| evaluate_point(id, &lhs, &rhs, p, settings))
            .collect()
    };
    let outcomes = match settings.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidContext(e.to_string()))?
            .install(run),
        None => run(),
    };
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    let mut skipped_poles = 0;
    for outcome in outcomes {
        match outcome {
            Outcome::Case(c) => cases.push(c),
            Outcome::Pole => skipped_poles += 1,
            Outcome::Failed(f) => failures.push(f),
        }
    }
    if cases.is_empty() && failures.is_empty() {
        return Err(Error::EmptyGridAfterPoleFilter);
    }
    let mut status = cases.iter().map(IdentityCase::status).max().unwrap_or(Status::Verified);
    if !failures.is_empty() && status == Status::Verified {
        status = Status::Inconclusive;
    }
    let max_residual = cases
        .iter()
        .map(|c| c.residual.clone())
        .reduce(|a, b| a.max_abs(&b))
        .unwrap_or_else(|| Scalar::exact(0));
    Ok(IdentityReport {
        identity_id: id.to_string(),
        mode: settings.mode,
        cases,
        failures,
        max_residual,
        status,
        skipped_poles,
    })
}

/// Runs a catalogued identity on `grid`, or on its default grid.
pub fn run_identity(identity: &Identity, grid: Option<&Grid>, settings: &CheckSettings) -> Result<IdentityReport> {
    let default = identity.default_grid();
    let grid = grid.unwrap_or(&default);
    check_identity(identity.id, identity.lhs, identity.rhs, grid, identity.keep, settings)
}

/// Per-variant reports for an identity's alternative forms, the main form
/// first.
pub fn probe(identity: &Identity, grid: Option<&Grid>, settings: &CheckSettings) -> Result<Vec<(String, IdentityReport)>> {
    let default = identity.default_grid();
    let grid = grid.unwrap_or(&default);
    let mut out = vec![("main".to_string(), run_identity(identity, Some(grid), settings)?)];
    for v in &identity.variants {
        let id = format!("{}:{}", identity.id, v.name);
        out.push((v.name.to_string(), check_identity(&id, v.lhs, v.rhs, grid, identity.keep, settings)?));
    }
    Ok(out)
}

/// Exact rational from a grid literal, used by tests and the CLI.
pub fn rational(text: &str) -> Result<Rational> {
    Scalar::parse_rational(text)
}
