use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rug::Rational;

use crate::context::QContext;
use crate::error::{Error, Result};
use crate::scalar::{Approx, Scalar};

type Evaluator = dyn Fn(&Scalar, &QContext) -> Result<Approx> + Send + Sync;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    arg: Rational,
    precision: Option<u32>,
}

impl CacheKey {
    fn new(x: &Scalar) -> Result<Self> {
        let arg = match x {
            Scalar::Exact(r) => r.clone(),
            Scalar::Float(f) => f
                .to_rational()
                .ok_or_else(|| Error::DomainError(format!("non-finite argument {x}")))?,
        };
        Ok(CacheKey {
            arg,
            precision: x.precision(),
        })
    }
}

struct Inner {
    evaluator: Box<Evaluator>,
    cache: Mutex<HashMap<CacheKey, Approx>>,
    calls: AtomicUsize,
}

/// A one-variable evaluator with a memo of evaluated points.
///
/// The evaluator receives the context it should compute in, which may carry
/// a higher precision than the caller's. Values are cached by exact argument
/// and precision. Clones share the cache.
#[derive(Clone)]
pub struct FunctionHandle {
    inner: Arc<Inner>,
}

impl fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("calls", &self.calls())
            .field("cached", &self.cached_points())
            .finish()
    }
}

impl FunctionHandle {
    /// Wraps an evaluator that reports its own error bound.
    pub fn new<F>(evaluator: F) -> Self
    where
        F: Fn(&Scalar, &QContext) -> Result<Approx> + Send + Sync + 'static,
    {
        FunctionHandle {
            inner: Arc::new(Inner {
                evaluator: Box::new(evaluator),
                cache: Mutex::new(HashMap::new()),
                calls: AtomicUsize::new(0),
            }),
        }
    }

    /// Wraps an evaluator whose float results are accurate to a few ulps.
    pub fn from_fn<F>(evaluator: F) -> Self
    where
        F: Fn(&Scalar, &QContext) -> Result<Scalar> + Send + Sync + 'static,
    {
        FunctionHandle::new(move |x, ctx| evaluator(x, ctx).map(Approx::exact))
    }

    pub fn eval(&self, x: &Scalar, ctx: &QContext) -> Result<Approx> {
        ctx.check(x)?;
        let key = CacheKey::new(x)?;
        if let Some(v) = self.lock().get(&key) {
            return Ok(v.clone());
        }
        // Evaluate outside the lock; evaluators may themselves use handles.
        let value = (self.inner.evaluator)(x, ctx)?;
        self.inner.calls.fetch_add(1, Ordering::Relaxed);
        self.lock().insert(key, value.clone());
        Ok(value)
    }

    /// Number of evaluator invocations so far (cache misses).
    pub fn calls(&self) -> usize {
        self.inner.calls.load(Ordering::Relaxed)
    }

    pub fn cached_points(&self) -> usize {
        self.lock().len()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<CacheKey, Approx>> {
        self.inner.cache.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// `t -> f(q^power t)`. Lattice points of the result are lattice points of
    /// `self`, so the two share evaluations.
    pub fn dilated(&self, power: i64) -> FunctionHandle {
        if power == 0 {
            return self.clone();
        }
        let base = self.clone();
        FunctionHandle::new(move |t, ctx| base.eval(&(t * &ctx.q_pow(power)), ctx))
    }

    /// Pointwise product.
    pub fn product(&self, other: &FunctionHandle) -> FunctionHandle {
        let (f, g) = (self.clone(), other.clone());
        FunctionHandle::new(move |t, ctx| Ok(f.eval(t, ctx)?.mul(&g.eval(t, ctx)?)))
    }

    /// Pointwise sum.
    pub fn sum(&self, other: &FunctionHandle) -> FunctionHandle {
        let (f, g) = (self.clone(), other.clone());
        FunctionHandle::new(move |t, ctx| Ok(f.eval(t, ctx)?.add(&g.eval(t, ctx)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_hits_do_not_call_the_evaluator() {
        let ctx = QContext::exact(Rational::from((1, 2))).unwrap();
        let f = FunctionHandle::from_fn(|x, _| Ok(x * x));
        let x = ctx.ratio(2, 3);
        let first = f.eval(&x, &ctx).unwrap();
        let second = f.eval(&x, &ctx).unwrap();
        assert_eq!(first, second);
        assert_eq!(f.calls(), 1);
        assert_eq!(f.clone().calls(), 1);
    }

    #[test]
    fn precision_is_part_of_the_key() {
        let lo = QContext::float(Rational::from((1, 2)), 64, Default::default()).unwrap();
        let hi = lo.boosted(64);
        let f = FunctionHandle::from_fn(|x, _| Ok(x * x));
        f.eval(&lo.ratio(1, 3), &lo).unwrap();
        f.eval(&hi.ratio(1, 3), &hi).unwrap();
        assert_eq!(f.calls(), 2);
    }

    #[test]
    fn dilation_reuses_lattice_points() {
        let ctx = QContext::exact(Rational::from((1, 2))).unwrap();
        let g = FunctionHandle::from_fn(|x, _| Ok(x * x));
        let x = ctx.one();
        g.eval(&ctx.ratio(1, 4), &ctx).unwrap();
        let h = g.dilated(2);
        assert_eq!(h.eval(&x, &ctx).unwrap().value, ctx.ratio(1, 16));
        assert_eq!(g.calls(), 1);
    }
}
