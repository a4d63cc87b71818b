mod common;

use common::*;
use qcalc::context::{Mode, QContext, TruncationPolicy};
use qcalc::identities::{
    check_identity, lookup, probe, registry, run_identity, verify_chu, verify_jackson, verify_q_gauss,
    verify_s5_chu_T, verify_s5_chu_deriv, CheckSettings, Grid, Params, Status,
};
use qcalc::error::Error;
use qcalc::scalar::Approx;
use rug::Rational;

fn variant_status(id: &str) -> Vec<(String, Status)> {
    let identity = lookup(id).unwrap();
    probe(&identity, None, &CheckSettings::new(identity.default_mode))
        .unwrap()
        .into_iter()
        .map(|(name, r)| (name, r.status))
        .collect()
}

#[test]
fn corrected_forms_verify_and_printed_forms_do_not() {
    let expect = |id: &str, want: &[(&str, Status)]| {
        let got = variant_status(id);
        let want: Vec<(String, Status)> = want.iter().map(|(n, s)| (n.to_string(), *s)).collect();
        assert_eq!(got, want, "{id}");
    };
    expect("chu-deriv", &[("main", Status::Verified), ("printed", Status::Violated)]);
    expect("chu-T", &[("main", Status::Verified), ("printed", Status::Violated)]);
    expect(
        "gauss-deriv",
        &[("main", Status::Verified), ("printed-i", Status::Violated), ("reindexed", Status::Verified)],
    );
    expect(
        "jackson-deriv",
        &[("main", Status::Verified), ("printed", Status::Violated), ("derivative", Status::Verified)],
    );
}

#[test]
fn chu_examples() {
    let ctx = exact(&rat(1, 2));
    let case = verify_chu(1, &ctx.ratio(1, 3), &ctx.ratio(1, 5), &ctx).unwrap();
    assert_eq!(case.lhs, ctx.ratio(1, 6));
    assert_eq!(case.rhs, ctx.ratio(1, 6));
    let case = verify_chu(0, &ctx.ratio(1, 3), &ctx.ratio(1, 5), &ctx).unwrap();
    assert_eq!(case.lhs, ctx.one());
    // c = q^-1 puts a zero in (c;q)_n.
    assert!(verify_chu(3, &ctx.ratio(1, 3), &ctx.int(2), &ctx).unwrap_err().is_pole());
    assert!(verify_s5_chu_deriv(3, 2, &ctx.ratio(1, 3), &ctx.ratio(1, 5), &ctx).is_err());
}

#[test]
fn terminating_gauss_is_exact() {
    // b = q^-2: the left side has three terms and the product ratio pairs off.
    let ctx = exact(&rat(1, 2));
    let case = verify_q_gauss(&ctx.ratio(1, 2), &ctx.int(4), &ctx.ratio(1, 10), &ctx).unwrap();
    assert!(case.residual.is_zero());
    assert_eq!(case.status(), Status::Verified);
}

#[test]
fn gauss_rejects_infinite_exact_evaluation() {
    let ctx = exact(&rat(1, 2));
    let err = verify_q_gauss(&ctx.ratio(1, 2), &ctx.ratio(1, 3), &ctx.ratio(1, 10), &ctx).unwrap_err();
    assert!(matches!(err, Error::ExactModeUnsupported(_)), "{err}");
}

#[test]
fn jackson_at_zero_argument() {
    let ctx = float(&rat(1, 2), 128);
    let case = verify_jackson(&ctx.ratio(1, 2), &ctx.ratio(1, 3), &ctx.ratio(1, 7), &ctx.zero(), &ctx).unwrap();
    assert_eq!(case.lhs, ctx.one());
    assert_eq!(case.rhs, ctx.one());
}

#[test]
fn chu_t_without_operator_reduces_to_chu() {
    let ctx = float(&rat(1, 2), 128);
    let (a, c) = (ctx.ratio(1, 3), ctx.ratio(1, 5));
    for n in 0..=3 {
        let t = verify_s5_chu_T(n, &a, &c, &ctx.zero(), &ctx.ratio(1, 2), &ctx).unwrap();
        let chu = verify_chu(n, &a, &c, &ctx).unwrap();
        let gap = (&t.lhs - &chu.lhs).abs().to_f64();
        assert!(gap <= 1e-36, "n={n}: {gap:e}");
        let gap = (&t.rhs - &chu.rhs).abs().to_f64();
        assert!(gap <= 1e-36, "n={n}: {gap:e}");
    }
}

#[test]
fn tightening_the_tolerance_shrinks_residuals() {
    for id in ["gauss", "jackson", "gauss-deriv", "jackson-deriv", "chu-T"] {
        let identity = lookup(id).unwrap();
        let max = |tol: i32| {
            let mut s = CheckSettings::float(128);
            s.truncation = TruncationPolicy::new(2000, Rational::from((1, rug::Integer::from(rug::Integer::u_pow_u(10, tol as u32)))), 3).unwrap();
            run_identity(&identity, None, &s).unwrap().max_residual.to_f64()
        };
        let loose = max(18);
        let tight = max(24);
        assert!(tight * 1e3 <= loose, "{id}: {loose:e} -> {tight:e}");
    }
}

#[test]
fn identical_routes_verify_with_zero_residual() {
    let grid = Grid::parse("a=1/2,1/3;q=1/2,1/3").unwrap();
    let side = |p: &Params, ctx: &QContext| Ok(Approx::exact(&p.get("a", ctx)? * ctx.q()));
    let r = check_identity("same", side, side, &grid, |_| true, &CheckSettings::exact()).unwrap();
    assert_eq!(r.status, Status::Verified);
    assert!(r.max_residual.is_zero());
    assert_eq!(r.cases.len(), 4);
}

#[test]
fn poles_are_skipped_and_counted() {
    // c = 2 is q^-1 at q = 1/2: pole for n >= 2.
    let grid = Grid::parse("n=0..3;a=1/3;c=2,1/5;q=1/2").unwrap();
    let r = run_identity(&lookup("chu").unwrap(), Some(&grid), &CheckSettings::exact()).unwrap();
    assert_eq!(r.skipped_poles, 2);
    assert_eq!(r.cases.len(), 6);
    let all_poles = Grid::parse("n=2,3;a=1/3;c=2;q=1/2").unwrap();
    let err = run_identity(&lookup("chu").unwrap(), Some(&all_poles), &CheckSettings::exact()).unwrap_err();
    assert_eq!(err, Error::EmptyGridAfterPoleFilter);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let identity = lookup("jackson").unwrap();
    let mut one = CheckSettings::float(128);
    one.threads = Some(1);
    let mut many = one.clone();
    many.threads = Some(4);
    let a = run_identity(&identity, None, &one).unwrap();
    let b = run_identity(&identity, None, &many).unwrap();
    assert_eq!(a, b);
}

#[test]
fn every_identity_has_a_nonempty_default_grid() {
    for identity in registry() {
        let points = identity.default_grid().points().unwrap();
        assert!(points.iter().any(|p| (identity.keep)(p)), "{}", identity.id);
        assert!(matches!(identity.default_mode, Mode::Exact | Mode::Float { precision_bits: 128 }));
    }
}
