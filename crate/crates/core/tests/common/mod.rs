#![allow(dead_code)]

use std::collections::BTreeMap;

use qcalc::context::{QContext, TruncationPolicy};
use qcalc::qdiff::FunctionHandle;
use qcalc::scalar::Scalar;
use rug::Rational;

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::from((p, q))
}

pub fn rats(values: &[(i64, i64)]) -> Vec<Rational> {
    values.iter().map(|&(p, q)| rat(p, q)).collect()
}

pub const Q_GRID: [(i64, i64); 3] = [(1, 2), (1, 3), (2, 5)];

pub fn exact(q: &Rational) -> QContext {
    QContext::exact(q.clone()).unwrap()
}

pub fn float(q: &Rational, bits: u32) -> QContext {
    QContext::float(q.clone(), bits, TruncationPolicy::default()).unwrap()
}

/// `prod_{j<n} (1 - a q^j)` by direct multiplication.
pub fn poch(a: &Scalar, q: &Scalar, n: usize) -> Scalar {
    let one = a.one_like();
    let mut p = one.clone();
    let mut aq = a.clone();
    for _ in 0..n {
        p = &p * &(&one - &aq);
        aq = &aq * q;
    }
    p
}

/// `t -> (a t;q)_n / (b t;q)_n` for parameter lists, evaluated directly.
pub fn poch_quotient(nums: Vec<Rational>, dens: Vec<Rational>, n: usize) -> FunctionHandle {
    FunctionHandle::from_fn(move |t, c| {
        let mut v = c.one();
        for a in &nums {
            v = &v * &poch(&(&c.lift(a) * t), c.q(), n);
        }
        for b in &dens {
            v = v.try_div(&poch(&(&c.lift(b) * t), c.q(), n))?;
        }
        Ok(v)
    })
}

/// `t -> t^m p(t)` with `p` given by `poch_quotient`.
pub fn monomial_times(m: i64, f: FunctionHandle) -> FunctionHandle {
    let g = FunctionHandle::from_fn(move |t, _| t.pow_int(m));
    g.product(&f)
}

/// Polynomial with the given coefficients, lowest degree first.
pub fn polynomial(coeffs: Vec<Rational>) -> FunctionHandle {
    FunctionHandle::from_fn(move |t, c| {
        let mut v = c.zero();
        for a in coeffs.iter().rev() {
            v = &(&v * t) + &c.lift(a);
        }
        Ok(v)
    })
}

/// One printed verdict line per acceptance criterion.
pub fn verdict(id: u32, title: &str, pass: bool, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id} [{title}]: {word} ({detail})");
}

pub fn params(pairs: &[(&str, Rational)]) -> BTreeMap<String, Rational> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}
