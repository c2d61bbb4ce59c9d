mod common;

use common::oracles::{self, Bumps};
use jumptail::expansion::*;
use jumptail::model::*;
use jumptail::models::*;
use jumptail::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn tr(eps: f64) -> TruncationConfig {
    TruncationConfig::new(eps).unwrap()
}

fn bumps_model(sigma: f64) -> ModelSpec {
    let sech2 = |x: f64| 1.0 / (x.cosh() * x.cosh());
    let nu = JumpIntensity::new(|x, r| Bumps::c(x) * Bumps::p(r), Bumps::p, None).with_partials(
        move |x, r| 0.25 * sech2(x) * Bumps::p(r),
        move |x, r| -0.5 * sech2(x) * x.tanh() * Bumps::p(r),
        |x, r| Bumps::c(x) * Bumps::dp(r),
    );
    ModelSpec::new(SmoothField::constant(0.0), SmoothField::constant(sigma), JumpTransform::identity(), nu, "bumps")
}

#[test]
fn p1_closed_form() {
    let m = model_a();
    for y in [0.5, 1.0, 2.0] {
        let v = p1(&m, &tr(default_eps(y)), 0.0, y).unwrap();
        let exact = 0.75 * y.powf(-1.01) / 1.01;
        assert!((v - exact).abs() < 1e-9, "{y}: {v} vs {exact}");
    }
    assert!((p1(&m, &tr(0.01), 0.0, 1.0).unwrap() - 0.742574).abs() < 1e-6);
}

#[test]
fn no_jumps_no_tail() {
    let m = diffusion(0.3, 0.7, "bm");
    let e = tail_expansion(&m, &tr(0.01), 0.2, 1.0, 0.1).unwrap();
    assert_eq!((e.p1, e.d_term, e.j_term), (0.0, 0.0, 0.0));
    assert_eq!(e.order2, 0.0);
}

#[test]
fn coefficients_match_specialized_model_a_displays() {
    let m = model_a();
    for y in [0.5, 1.0, 2.0] {
        let d = d_term(&m, &tr(0.1), 0.0, y).unwrap();
        let j = j_term(&m, &tr(0.1), 0.0, y).unwrap();
        let (od, oj) = (oracles::model_a_d(y), oracles::model_a_j(y, 0.1));
        assert!((d - od).abs() <= 1e-8 * od.abs(), "D at {y}: {d} vs {od}");
        assert!((j - oj).abs() <= 1e-8 * oj.abs(), "J at {y}: {j} vs {oj}");
    }
}

#[test]
fn diffusive_part_matches_finite_differences() {
    // D = b_ε(x) F' + σ²(x)/2 F'' - (b_ε(q) - σσ'(q)) G' + σ²(q)/2 G'' with
    // F(z) = P1(z, q - z) and G(w) = P1(x, w - x).
    let m = model_a();
    let t = tr(0.1);
    let (x, y) = (0.3, 1.2);
    let q = x + y;
    let f = |z: f64| p1(&m, &t, z, q - z).unwrap();
    let g = |w: f64| p1(&m, &t, x, w - x).unwrap();
    let h = 1e-3;
    let f1 = (f(x + h) - f(x - h)) / (2.0 * h);
    let f2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    let g1 = (g(q + h) - g(q - h)) / (2.0 * h);
    let g2 = (g(q + h) - 2.0 * g(q) + g(q - h)) / (h * h);
    let (bx, bq) = (b_eps(&m, &t, x).unwrap(), b_eps(&m, &t, q).unwrap());
    let (sx, sq) = (m.sigma.eval(x), m.sigma.eval(q));
    let ssp = sq * m.sigma.deriv(1, q);
    let fd = bx * f1 + 0.5 * sx * sx * f2 - (bq - ssp) * g1 + 0.5 * sq * sq * g2;
    let d = d_term(&m, &t, x, y).unwrap();
    assert!((d - fd).abs() < 1e-5, "{d} vs {fd}");
}

#[test]
fn eps_invariance() {
    let m = model_a();
    for eps in [0.1, 0.05, 0.02] {
        let a = tail_expansion(&m, &tr(eps), 0.0, 1.0, 0.1).unwrap();
        let b = tail_expansion(&m, &tr(eps / 2.0), 0.0, 1.0, 0.1).unwrap();
        assert!((a.p1 - b.p1).abs() <= 1e-7);
        assert!((a.p2 - b.p2).abs() <= 1e-5, "{eps}: {} vs {}", a.p2, b.p2);
    }
}

#[test]
fn identity_specialization_agrees() {
    let m = model_a();
    for x in [-1.0, 0.0, 1.5] {
        for y in [0.5, 1.0, 2.0] {
            let t = tr(default_eps(y));
            let a = tail_expansion(&m, &t, x, y, 0.1).unwrap();
            let b = tail_expansion_identity_r(&m, &t, x, y, 0.1).unwrap();
            assert!((a.p1 - b.p1).abs() <= 1e-7);
            assert!((a.p2 - b.p2).abs() <= 1e-7, "({x},{y}): {} vs {}", a.p2, b.p2);
        }
    }
}

#[test]
fn identity_path_rejects_other_transforms() {
    let mut m = model_a();
    m.gamma = JumpTransform::tanh_scaled(0.1);
    let r = tail_expansion_identity_r(&m, &tr(0.01), 0.0, 1.0, 0.1);
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn compound_poisson_derivatives() {
    let (b, s, y) = (0.1, 0.3, 1.5);
    let m = compound_poisson(1.0, 1.0, 2.0, b, s, "cp").unwrap();
    let e = tail_expansion(&m, &tr(default_eps(y)), 0.0, y, 0.0).unwrap();
    let (op1, op2) = oracles::short_time_coefficients(|t| oracles::compound_poisson_tail(t, y, b, s, 1.0, 1.0, 2.0), 0.05, 6);
    assert!((e.p1 - op1).abs() <= 1e-3 * op1.abs());
    assert!((e.p2 - op2).abs() <= 3e-2 * op2.abs(), "{} vs {op2}", e.p2);
    // closed forms: P1 = P[J >= 1.5], P2 = b·ν(y)·2 - λ P1 + ...; checked tighter
    assert!((e.p1 - 0.25).abs() < 1e-10);
    assert!((e.p2 + 0.15).abs() < 1e-8);
}

#[test]
fn two_jumps_needed() {
    // A single mark never reaches y = 3; two positive marks do with
    // probability P[U1 + U2 >= 3] / 4 = 1/8.
    let m = compound_poisson(1.0, 1.0, 2.0, 0.0, 0.4, "cp").unwrap();
    let e = tail_expansion(&m, &tr(0.01), 0.0, 3.0, 0.0).unwrap();
    assert_eq!(e.p1, 0.0);
    assert!(e.d_term.abs() < 1e-12);
    assert!((e.j_term - 0.125).abs() < 1e-9, "{}", e.j_term);
    let e = tail_expansion(&m, &tr(0.01), 0.0, 5.0, 0.0).unwrap();
    assert!(e.p2.abs() < 1e-12);
}

#[test]
fn state_dependent_thinning_oracle() {
    let m = bumps_model(0.3);
    let o = Bumps { sigma: 0.3 };
    for (x, y) in [(0.0, 1.5), (0.7, 1.2), (-0.5, 2.0)] {
        let e = tail_expansion(&m, &tr(default_eps(y)), x, y, 0.0).unwrap();
        let (op1, op2) = o.coefficients(x, y);
        assert!((e.p1 - op1).abs() < 1e-9, "P1 at ({x},{y}): {} vs {op1}", e.p1);
        assert!((e.p2 - op2).abs() < 1e-7, "P2 at ({x},{y}): {} vs {op2}", e.p2);
    }
}

#[test]
fn assembly() {
    let m = model_a();
    let e = tail_expansion(&m, &tr(0.01), 0.0, 1.0, 0.0).unwrap();
    assert_eq!((e.order1, e.order2), (0.0, 0.0));
    let e = tail_expansion(&m, &tr(0.01), 0.0, 1.0, 0.1).unwrap();
    assert_eq!(e.p2, e.d_term + e.j_term);
    assert!((e.order1 - 0.0742574).abs() < 1e-7);
    assert!((e.order2 - (e.order1 + 0.005 * e.p2)).abs() < 1e-15);
    let p2 = oracles::model_a_d(1.0) + oracles::model_a_j(1.0, 0.01);
    assert!((e.p2 - p2).abs() < 1e-6 * p2);
    let big = tail_expansion(&m, &tr(0.01), 0.0, 1.0, 5.0).unwrap();
    assert!(big.order2 > 1.0 && big.order2_clamped == 1.0);
    assert!(tail_expansion(&m, &tr(0.01), 0.0, 1.0, -0.1).is_err());
}

#[test]
fn sensitivities() {
    let m = model_a();
    let d = drift_sensitivity(&m, 0.0, 1.0).unwrap();
    assert!((d - (1.5 + 1.0 / (2.0 * PI * 1.01))).abs() < 1e-9);
    let v = vol_sensitivity(&m, 0.0, 1.0, VolFunctional::Bracket).unwrap();
    assert!((v - 1.5075).abs() < 1e-9);
    let v = vol_sensitivity_exact(&m, 0.0, 1.0, VolFunctional::Bracket).unwrap();
    assert!((v - 1.5075 - 0.75 / (2.0 * PI) * 4.0 / 3.0).abs() < 1e-9);

    // state-free jumps: the drift only shifts the level, t ν̄(y - bt)
    let free = compound_poisson(1.0, 1.0, 2.0, 0.0, 1.0, "cp").unwrap();
    assert!((drift_sensitivity(&free, 0.0, 1.5).unwrap() - 2.0 * 0.5).abs() < 1e-12);
    assert!(vol_sensitivity(&free, 0.0, 1.5, VolFunctional::Bracket).unwrap().abs() < 1e-12);
    let none = diffusion(0.0, 1.0, "bm");
    assert_eq!(drift_sensitivity(&none, 0.0, 1.0).unwrap(), 0.0);
    assert_eq!(vol_sensitivity(&none, 0.0, 1.0, VolFunctional::Lambda).unwrap(), 0.0);
}

#[test]
fn sensitivities_are_the_linear_coefficients() {
    // Constant b and σ: P2 is affine in b and in σ².
    let base = model_a();
    let with = |b: f64, s: f64| {
        let mut m = base.clone();
        m.b = SmoothField::constant(b);
        m.sigma = SmoothField::constant(s);
        tail_expansion(&m, &tr(0.01), 0.0, 1.0, 0.0).unwrap().p2
    };
    let db = (with(0.4, 0.5) - with(0.0, 0.5)) / 0.4;
    assert!((db - drift_sensitivity(&base, 0.0, 1.0).unwrap()).abs() < 1e-6, "{db}");
    let ds = (with(0.0, 0.8) - with(0.0, 0.5)) / (0.64 - 0.25);
    let exact = vol_sensitivity_exact(&base, 0.0, 1.0, VolFunctional::Bracket).unwrap();
    assert!((ds - exact).abs() < 1e-6, "{ds} vs {exact}");
}

#[test]
fn eps_compatibility() {
    let m = model_a();
    assert!(check_eps_compatible(&m, &tr(0.1), 0.0, 1.0));
    assert!(!check_eps_compatible(&m, &tr(0.6), 0.0, 1.0));
    assert!(check_eps_compatible(&m, &tr(0.01), 0.0, 0.05));
    assert!(!check_eps_compatible(&m, &tr(0.01), 0.0, -1.0));
    assert!(matches!(p1(&m, &tr(0.6), 0.0, 1.0), Err(Error::Config(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn p1_nonincreasing_in_y(x in -4.0..4.0f64, y in 0.2..5.0f64, dy in 0.0..2.0f64) {
        let m = model_a();
        let t = tr(0.01);
        let a = p1(&m, &t, x, y).unwrap();
        let b = p1(&m, &t, x, y + dy).unwrap();
        prop_assert!(b <= a + 1e-12);
        prop_assert!(a >= 0.0);
    }
}
