mod common;

use common::*;
use proptest::prelude::*;
use qcalc::context::QContext;
use qcalc::error::Error;
use qcalc::identities::{verify_chu, Grid};
use qcalc::qcore::{qbinom, qpoch};
use qcalc::qdiff::{
    cf_double_ratio, cf_inv_poch, cf_poch_ratio, cf_xn_over_poch, dq_iter, leibniz_rhs, DoubleRatio, FunctionHandle,
};
use qcalc::qhyper::{dphi_partial_sums, dphi_with, dq_param_lower, phi, SeriesSpec};
use qcalc::qoper::{t_apply, t_partial_sums, OperatorSpec};
use qcalc::scalar::Scalar;
use rug::Rational;

fn small_rational() -> impl Strategy<Value = Rational> {
    (-9i64..=9, 1i64..=9).prop_map(|(p, q)| rat(p, q))
}

fn base_q() -> impl Strategy<Value = Rational> {
    (1i64..=4, 2i64..=7).prop_filter_map("0 < q < 1", |(p, d)| (p < d).then(|| rat(p, d)))
}

fn nonzero_rational() -> impl Strategy<Value = Rational> {
    small_rational().prop_filter("nonzero", |r| *r != 0)
}

fn grid_value() -> impl Strategy<Value = Rational> {
    prop::sample::select(rats(&[(1, 2), (-1, 2), (1, 3), (2, 3), (1, 5)]))
}

/// Closed form and lattice oracle agree, or both meet a pole.
fn same(closed: qcalc::error::Result<Scalar>, oracle: qcalc::error::Result<Scalar>) -> bool {
    match (closed, oracle) {
        (Ok(a), Ok(b)) => a == b,
        (Err(e), _) => e.is_pole() || matches!(e, Error::DivisionByZero),
        (Ok(_), Err(_)) => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qbinom_is_symmetric_and_satisfies_pascal(q in base_q(), n in 1usize..25, k in 0i64..25) {
        let ctx = exact(&q);
        prop_assert_eq!(qbinom(n, k, &ctx), qbinom(n, n as i64 - k, &ctx));
        let rhs = &qbinom(n - 1, k - 1, &ctx) + &(&ctx.q_pow(k) * &qbinom(n - 1, k, &ctx));
        prop_assert_eq!(qbinom(n, k, &ctx), rhs);
    }

    #[test]
    fn finite_products_split_and_commute(q in base_q(), a in small_rational(), n in 0usize..12, k in 0usize..12) {
        let ctx = exact(&q);
        let a = ctx.lift(&a);
        let aqn = &a * &ctx.q_pow(n as i64);
        let aqk = &a * &ctx.q_pow(k as i64);
        prop_assert_eq!(qpoch(&a, &ctx, n + k), &qpoch(&a, &ctx, n) * &qpoch(&aqn, &ctx, k));
        prop_assert_eq!(&qpoch(&aqn, &ctx, k) * &qpoch(&a, &ctx, n), &qpoch(&a, &ctx, k) * &qpoch(&aqk, &ctx, n));
        prop_assert_eq!(qpoch(&a, &ctx, n), poch(&a, ctx.q(), n));
    }

    #[test]
    fn single_parameter_closed_forms_match_lattice(
        q in base_q(), a in small_rational(), b in small_rational(), x in nonzero_rational(),
        n in 0usize..6, k in 0usize..6,
    ) {
        let ctx = exact(&q);
        let (asc, bsc, xs) = (ctx.lift(&a), ctx.lift(&b), ctx.lift(&x));
        let inv = poch_quotient(vec![], vec![a.clone()], n);
        prop_assert!(same(cf_inv_poch(&asc, &ctx, k, n, &xs), dq_iter(&inv, &ctx, k, &xs)));
        let xn = monomial_times(n as i64, inv);
        prop_assert!(same(cf_xn_over_poch(&asc, &ctx, k, n, &xs), dq_iter(&xn, &ctx, k, &xs)));
        if k <= n {
            let f = poch_quotient(vec![a.clone()], vec![b.clone()], n);
            prop_assert!(same(cf_poch_ratio(&asc, &bsc, &ctx, k, n, &xs), dq_iter(&f, &ctx, k, &xs)));
        }
    }

    #[test]
    fn double_ratio_matches_lattice_on_the_full_grid(
        q in prop::sample::select(rats(&Q_GRID)),
        x in prop::sample::select(rats(&[(1, 1), (1, 2), (2, 3)])),
        a in grid_value(), b in grid_value(), c in grid_value(), d in grid_value(),
        n in 0usize..=6, k in 0usize..=6,
    ) {
        let ctx = exact(&q);
        let f = poch_quotient(vec![a.clone(), b.clone()], vec![c.clone(), d.clone()], n);
        let p = DoubleRatio::new(ctx.lift(&a), ctx.lift(&b), ctx.lift(&c), ctx.lift(&d));
        let xs = ctx.lift(&x);
        prop_assert_eq!(cf_double_ratio(&p, &ctx, k, n, &xs).unwrap(), dq_iter(&f, &ctx, k, &xs).unwrap());
    }

    #[test]
    fn leibniz_holds_for_random_polynomials(
        q in base_q(), x in nonzero_rational(),
        pf in prop::collection::vec(small_rational(), 1..6),
        pg in prop::collection::vec(small_rational(), 1..6),
        n in 0usize..6,
    ) {
        let ctx = exact(&q);
        let (f, g) = (polynomial(pf), polynomial(pg));
        let xs = ctx.lift(&x);
        prop_assert_eq!(dq_iter(&f.product(&g), &ctx, n, &xs).unwrap(), leibniz_rhs(&f, &g, &ctx, n, &xs).unwrap());
    }

    #[test]
    fn lattice_derivative_calls_the_evaluator_once_per_point(q in base_q(), x in nonzero_rational(), k in 0usize..12) {
        let ctx = exact(&q);
        let f = FunctionHandle::from_fn(|t, _| t.pow_int(3));
        dq_iter(&f, &ctx, k, &ctx.lift(&x)).unwrap();
        prop_assert_eq!(f.calls(), k + 1);
    }

    #[test]
    fn chu_sum_is_exact(q in base_q(), a in nonzero_rational(), c in small_rational(), n in 0usize..10) {
        let ctx = exact(&q);
        match verify_chu(n, &ctx.lift(&a), &ctx.lift(&c), &ctx) {
            Ok(case) => prop_assert!(case.residual.is_zero()),
            Err(e) => prop_assert!(e.is_pole(), "{e}"),
        }
    }

    #[test]
    fn undeformed_series_equals_phi(q in base_q(), a in small_rational(), b in small_rational(), m in 0i64..6) {
        let ctx = exact(&q);
        let spec = SeriesSpec::new(vec![ctx.q_pow(-m), ctx.lift(&a)], vec![ctx.lift(&b)], ctx.q().clone());
        match (phi(&spec, &ctx), dphi_with(&spec, &ctx, &ctx.one())) {
            (Ok(p), Ok(d)) => prop_assert_eq!(p.value, d.value),
            (Err(e1), Err(e2)) => prop_assert_eq!(e1, e2),
            _ => prop_assert!(false, "routes disagree on success"),
        }
    }

    #[test]
    fn longer_truncations_extend_earlier_partial_sums(q in base_q(), z in small_rational(), count in 1usize..30) {
        let ctx = exact(&q);
        let spec = SeriesSpec::new(vec![rat(1, 2).into(), rat(1, 3).into()], vec![rat(1, 5).into()], z.into());
        let spec = SeriesSpec::new(spec.upper.iter().map(|p| ctx.round(p)).collect(), spec.lower.iter().map(|p| ctx.round(p)).collect(), ctx.round(&spec.z));
        let short = dphi_partial_sums(&spec, &ctx, &ctx.ratio(1, 2), count).unwrap();
        let long = dphi_partial_sums(&spec, &ctx, &ctx.ratio(1, 2), count + 7).unwrap();
        prop_assert_eq!(&long[..count], &short[..]);
    }

    #[test]
    fn lower_parameter_derivative_matches_lattice(
        q in base_q(), a in small_rational(), c in nonzero_rational(), m in 1i64..5, k in 1usize..4,
    ) {
        let ctx = exact(&q);
        let spec = SeriesSpec::new(vec![ctx.q_pow(-m), ctx.lift(&a)], vec![ctx.lift(&c)], ctx.q().clone());
        let (a2, m2) = (a.clone(), m);
        let f = FunctionHandle::from_fn(move |t, cx| {
            let s = SeriesSpec::new(vec![cx.q_pow(-m2), cx.lift(&a2)], vec![t.clone()], cx.q().clone());
            Ok(phi(&s, cx)?.value)
        });
        let closed = dq_param_lower(&spec, &ctx, k).map(|r| r.value);
        prop_assert!(same(closed, dq_iter(&f, &ctx, k, &ctx.lift(&c))));
    }

    #[test]
    fn operator_is_linear(q in base_q(), y in small_rational(), x in nonzero_rational(),
        pf in prop::collection::vec(small_rational(), 1..5),
        pg in prop::collection::vec(small_rational(), 1..5),
    ) {
        let ctx = exact(&q);
        let op = OperatorSpec::new(ctx.lift(&y), ctx.ratio(1, 2));
        let (f, g) = (polynomial(pf), polynomial(pg));
        let xs = ctx.lift(&x);
        let whole = t_apply(&op, &f.sum(&g), &ctx, &xs).unwrap().value;
        let parts = &t_apply(&op, &f, &ctx, &xs).unwrap().value + &t_apply(&op, &g, &ctx, &xs).unwrap().value;
        prop_assert_eq!(whole, parts);
        let sums = t_partial_sums(&op, &f.sum(&g), &ctx, &xs, 8).unwrap();
        let fs = t_partial_sums(&op, &f, &ctx, &xs, 8).unwrap();
        let gs = t_partial_sums(&op, &g, &ctx, &xs, 8).unwrap();
        for i in 0..8 {
            prop_assert_eq!(&sums[i], &(&fs[i] + &gs[i]));
        }
    }

    #[test]
    fn grid_points_form_the_cartesian_product(
        a in prop::collection::vec(small_rational(), 1..5),
        lo in -3i64..3, span in 0i64..4,
    ) {
        let text = format!(
            "a={};n={}..{}",
            a.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","),
            lo,
            lo + span
        );
        let points = Grid::parse(&text).unwrap().points().unwrap();
        prop_assert_eq!(points.len(), a.len() * (span as usize + 1));
    }
}

#[test]
fn float_context_rejects_low_precision() {
    assert!(QContext::float(rat(1, 2), 1, Default::default()).is_err());
}
