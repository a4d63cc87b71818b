//! Running sums of infinite series under a [`TruncationPolicy`].

use std::collections::VecDeque;

use crate::context::QContext;
use crate::error::{Error, Result};
use crate::scalar::{Approx, Scalar};

/// Ratios at or above this are too close to one for a geometric tail.
const MAX_EMPIRICAL_RATIO: f64 = 0.99;

pub(crate) enum Step {
    Continue,
    Done { tail: Scalar },
}

/// Accumulates terms and applies the stop rule: `stall_window` consecutive
/// terms below `rel_tol * max(|S|, max|t|)`, followed by a geometric tail
/// estimate that must itself fall below the same threshold.
pub(crate) struct Accumulator<'a> {
    ctx: &'a QContext,
    sum: Scalar,
    abs_sum: Scalar,
    bound: Scalar,
    max_abs: Scalar,
    last_abs: Option<Scalar>,
    ratios: VecDeque<f64>,
    quiet: usize,
    growing: usize,
    terms: usize,
}

impl<'a> Accumulator<'a> {
    pub(crate) fn new(ctx: &'a QContext) -> Self {
        Accumulator {
            ctx,
            sum: ctx.zero(),
            abs_sum: ctx.zero(),
            bound: ctx.zero(),
            max_abs: ctx.zero(),
            last_abs: None,
            ratios: VecDeque::new(),
            quiet: 0,
            growing: 0,
            terms: 0,
        }
    }

    pub(crate) fn sum(&self) -> &Scalar {
        &self.sum
    }

    /// Sum of the per-term error bounds pushed so far.
    pub(crate) fn bound(&self) -> &Scalar {
        &self.bound
    }

    pub(crate) fn terms(&self) -> usize {
        self.terms
    }

    fn threshold(&self) -> Scalar {
        &self.ctx.rel_tol() * &self.sum.max_abs(&self.max_abs)
    }

    /// Adds a term without applying any stop rule.
    pub(crate) fn add(&mut self, term: &Approx) {
        let at = term.value.abs();
        self.sum = &self.sum + &term.value;
        self.abs_sum = &self.abs_sum + &at;
        self.bound = &self.bound + &term.bound;
        if at.cmp_abs(&self.max_abs).map(|o| o.is_gt()).unwrap_or(false) {
            self.max_abs = at.clone();
        }
        let ratio = match &self.last_abs {
            None => None,
            Some(prev) if prev.is_zero() => Some(if at.is_zero() { 0.0 } else { f64::INFINITY }),
            Some(prev) => Some((at.log2_abs() - prev.log2_abs()).exp2()),
        };
        if let Some(r) = ratio {
            if self.ratios.len() == self.ctx.truncation().stall_window {
                self.ratios.pop_front();
            }
            self.ratios.push_back(r);
            self.growing = if r > 1.0 { self.growing + 1 } else { 0 };
        }
        self.last_abs = Some(at);
        self.terms += 1;
    }

    /// Adds a term and decides whether to stop. `ratio_bound`, when given, is
    /// a proven bound on `|t_{m+1} / t_m|` for every later index; otherwise
    /// the largest recently observed ratio is used.
    pub(crate) fn push(&mut self, term: &Approx, ratio_bound: Option<f64>) -> Result<Step> {
        self.add(term);
        let last = self.last_abs.clone().expect("term was just added");
        let threshold = self.threshold();
        let quiet_now = last.try_cmp(&threshold)?.is_le();
        self.quiet = if quiet_now { self.quiet + 1 } else { 0 };
        let window = self.ctx.truncation().stall_window;
        if self.quiet >= window {
            let rho = match ratio_bound {
                Some(r) => r,
                None => {
                    let observed = self.ratios.iter().cloned().fold(0.0, f64::max);
                    if observed >= MAX_EMPIRICAL_RATIO {
                        f64::INFINITY
                    } else {
                        observed
                    }
                }
            };
            if last.is_zero() && ratio_bound.is_none() && self.ratios.iter().all(|r| *r == 0.0) {
                return Ok(Step::Done {
                    tail: self.ctx.zero(),
                });
            }
            if rho.is_finite() && rho < 1.0 {
                // small safety margin for the f64 ratio
                let factor = rho / (1.0 - rho) * (1.0 + 1e-9);
                let tail = &last * &self.ctx.from_f64(factor);
                if tail.try_cmp(&threshold)?.is_le() {
                    return Ok(Step::Done { tail });
                }
            }
        }
        let max_terms = self.ctx.truncation().max_terms;
        if ratio_bound.is_none() && self.growing >= window && self.terms * 2 > max_terms {
            return Err(Error::Divergent(format!(
                "terms grew for {} consecutive steps after {} terms",
                self.growing, self.terms
            )));
        }
        if self.terms >= max_terms {
            return Err(Error::MaxTermsExceeded { max_terms });
        }
        Ok(Step::Continue)
    }

    /// Worst-case rounding error of the running sum when each term carries
    /// up to `ops_per_term` rounded operations.
    pub(crate) fn rounding(&self, ops_per_term: usize) -> Scalar {
        let ops = (self.terms + ops_per_term) as i64;
        &(&self.ctx.eps() * &self.ctx.int(ops)) * &self.abs_sum
    }
}
