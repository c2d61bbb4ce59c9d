//! Martingale drift, the share-measure model and OTM call expansions.

use std::sync::Arc;

use dashmap::DashMap;

use crate::error::{Error, Result};
use crate::expansion::tail_expansion;
use crate::model::{default_r_grid, default_x_grid, Dominating, JumpIntensity, JumpTransform, ModelSpec, SmoothField, TruncationConfig};
use crate::quadrature::{try_integrate_punctured, try_integrate_range, Tol, FINE_TOL};

/// Sup-norm bound on the martingale residual required before pricing.
pub const MARTINGALE_GATE: f64 = 1e-6;

/// c = sup |∂₂γ|: exactly 1 for γ = r, otherwise the grid maximum
/// inflated by 10%.
pub fn gamma_slope_bound(gamma: &JumpTransform) -> f64 {
    if gamma.is_identity() {
        return 1.0;
    }
    let mut c = 0.0f64;
    for x in default_x_grid() {
        for r in default_r_grid() {
            c = c.max(gamma.d2(x, r).abs());
        }
    }
    1.1 * c
}

/// Checks ∫_{r>=1} e^{c r} g(r) dr < ∞ by outward dyadic shells; returns c.
/// Uses h in place of g for finite-activity intensities.
pub fn check_moment_condition(gamma: &JumpTransform, nu: &JumpIntensity) -> Result<f64> {
    let c = gamma_slope_bound(gamma);
    let weight = |r: f64| match nu.alpha() {
        Some(a) => nu.h(r) * r.abs().powf(a + 1.0),
        None => nu.h(r),
    };
    let mut acc = 0.0;
    let mut prev = f64::INFINITY;
    let mut growth = 0;
    let mut lo = 1.0f64;
    for _ in 0..64 {
        let hi = 2.0 * lo;
        let s = try_integrate_range(|r| Ok(exp_times(c * r, weight(r))), lo, hi, nu.breaks(), Tol::new(0.0, 1e-8))
            .map_err(|e| Error::Moment(format!("moment integral failed on [{lo}, {hi}]: {e}")))?
            .value;
        if !s.is_finite() {
            return Err(Error::Moment(format!("e^(c r) g(r) not integrable near r = {hi}")));
        }
        acc += s;
        if s > prev {
            growth += 1;
            if growth >= 8 {
                return Err(Error::Moment(format!(
                    "∫_(r>=1) e^(c r) g(r) dr diverges (c = {c}, partial sum {acc:.6e})"
                )));
            }
        } else {
            growth = 0;
        }
        if s <= 1e-15 * acc.max(1e-300) || (acc == 0.0 && lo > 64.0) {
            return Ok(c);
        }
        prev = s;
        lo = hi;
    }
    Err(Error::Moment(format!("moment integral did not settle (partial sum {acc:.6e})")))
}

/// ∫ (e^γ - 1 - 1{|r|<=1} γ) ν dr.
/// e^a · w without overflow when w is tiny.
fn exp_times(a: f64, w: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else if a > 300.0 {
        w.signum() * (a + w.abs().ln()).exp()
    } else {
        a.exp() * w
    }
}

/// e^g - 1 - g, by its series near 0.
fn exp_excess(g: f64) -> f64 {
    if g.abs() < 0.1 {
        // Σ_{n>=2} g^n / n!
        let (mut term, mut sum) = (0.5 * g * g, 0.0);
        for n in 3..18 {
            sum += term;
            term *= g / n as f64;
        }
        sum
    } else {
        g.exp_m1() - g
    }
}

/// e^g - 1 - g e^g, by its series near 0.
fn share_excess(g: f64) -> f64 {
    if g.abs() < 0.1 {
        // Σ_{n>=2} (1 - n) g^n / n!
        let (mut pow_fact, mut sum) = (0.5 * g * g, 0.0);
        for n in 2..18 {
            sum += (1.0 - n as f64) * pow_fact;
            pow_fact *= g / (n + 1) as f64;
        }
        sum
    } else {
        g.exp() * (1.0 - g) - 1.0
    }
}

fn exp_compensator(gamma: &JumpTransform, nu: &JumpIntensity, x: f64) -> Result<f64> {
    let f = |r: f64| {
        let g = gamma.eval(x, r);
        let n = nu.nu(x, r);
        Ok(if r.abs() <= 1.0 { exp_excess(g) * n } else { exp_times(g, n) - n })
    };
    Ok(try_integrate_punctured(f, 0.0, nu.breaks(), FINE_TOL)?.value)
}

/// ∫ (e^γ - 1 - e^γ 1{|r|<=1} γ) ν dr.
fn share_compensator(gamma: &JumpTransform, nu: &JumpIntensity, x: f64) -> Result<f64> {
    let f = |r: f64| {
        let g = gamma.eval(x, r);
        let n = nu.nu(x, r);
        Ok(if r.abs() <= 1.0 { share_excess(g) * n } else { exp_times(g, n) - n })
    };
    Ok(try_integrate_punctured(f, 0.0, nu.breaks(), FINE_TOL)?.value)
}

/// b(x) + σ²(x)/2 + ∫ (e^γ - 1 - 1{|r|<=1} γ) ν dr.
pub fn martingale_residual(model: &ModelSpec, x: f64) -> Result<f64> {
    check_moment_condition(&model.gamma, &model.nu)?;
    let s = model.sigma.eval(x);
    Ok(model.b.eval(x) + 0.5 * s * s + exp_compensator(&model.gamma, &model.nu, x)?)
}

/// Largest |martingale_residual| over the grid with its location.
pub fn martingale_sup_residual(model: &ModelSpec, x_grid: &[f64]) -> Result<(f64, f64)> {
    check_moment_condition(&model.gamma, &model.nu)?;
    let mut worst = (0.0, f64::NAN);
    for &x in x_grid {
        let s = model.sigma.eval(x);
        let r = (model.b.eval(x) + 0.5 * s * s + exp_compensator(&model.gamma, &model.nu, x)?).abs();
        if !(r <= worst.0) {
            worst = (r, x);
        }
    }
    Ok(worst)
}

fn memoized(f: impl Fn(f64) -> Result<f64> + Send + Sync + 'static) -> SmoothField {
    let cache: Arc<DashMap<u64, f64>> = Arc::new(DashMap::new());
    SmoothField::new(move |x: f64| {
        if let Some(v) = cache.get(&x.to_bits()) {
            return *v;
        }
        let v = f(x).unwrap_or(f64::NAN);
        *cache.entry(x.to_bits()).or_insert(v)
    })
}

/// The drift making e^X a martingale:
/// b(x) = -σ²(x)/2 - ∫ (e^γ - 1 - 1{|r|<=1} γ) ν dr.
/// Values are cached per x; derivatives come from finite differences.
pub fn calibrate_drift(sigma: &SmoothField, gamma: &JumpTransform, nu: &JumpIntensity) -> Result<SmoothField> {
    check_moment_condition(gamma, nu)?;
    exp_compensator(gamma, nu, 0.0)?;
    let (s, g, n) = (sigma.clone(), gamma.clone(), nu.clone());
    Ok(memoized(move |x| {
        let sx = s.eval(x);
        Ok(-0.5 * sx * sx - exp_compensator(&g, &n, x)?)
    }))
}

/// b#(x) = b(x) + σ²(x) + ∫ (e^γ - 1) 1{|r|<=1} γ ν dr, valid without the
/// martingale condition.
pub fn share_drift_general(model: &ModelSpec, x: f64) -> Result<f64> {
    let (g, nu) = (&model.gamma, &model.nu);
    let f = |r: f64| {
        let v = g.eval(x, r);
        Ok(v.exp_m1() * v * nu.nu(x, r))
    };
    let small = crate::quadrature::try_integrate_small(f, 1.0, FINE_TOL)?.value;
    let s = model.sigma.eval(x);
    Ok(model.b.eval(x) + s * s + small)
}

/// The model under dP# = e^{X_t} dP: ν# = e^γ ν,
/// b# = σ²/2 - ∫ (e^γ - 1 - e^γ 1{|r|<=1} γ) ν dr, σ and γ unchanged, and
/// h#(r) = e^{c max(r, 0)} h(r).
pub fn share_transform(model: &ModelSpec) -> Result<ModelSpec> {
    let c = check_moment_condition(&model.gamma, &model.nu)?;
    let gamma = model.gamma.clone();
    let nu = model.nu.clone();
    let sigma = model.sigma.clone();

    let (g0, n0) = (gamma.clone(), nu.clone());
    let b_sharp = {
        let (s, g, n) = (sigma.clone(), gamma.clone(), nu.clone());
        share_compensator(&g, &n, 0.0)?;
        memoized(move |x| {
            let sx = s.eval(x);
            Ok(0.5 * sx * sx - share_compensator(&g, &n, x)?)
        })
    };
    let (g1, n1) = (gamma.clone(), nu.clone());
    let (g2, n2) = (gamma.clone(), nu.clone());
    let (g3, n3) = (gamma.clone(), nu.clone());
    let n4 = nu.clone();
    let h_sharp = move |r: f64| exp_times(c * r.max(0.0), n4.h(r));
    let mut sharp = JumpIntensity::new(move |x, r| exp_times(g0.eval(x, r), n0.nu(x, r)), h_sharp, nu.alpha())
        .with_partials(
            move |x, r| exp_times(g1.eval(x, r), g1.d1(x, r) * n1.nu(x, r) + n1.d1(x, r)),
            move |x, r| {
                let gx = g2.d1(x, r);
                let w = (gx * gx + g2.d11(x, r)) * n2.nu(x, r) + 2.0 * gx * n2.d1(x, r) + n2.d11(x, r);
                exp_times(g2.eval(x, r), w)
            },
            move |x, r| exp_times(g3.eval(x, r), g3.d2(x, r) * n3.nu(x, r) + n3.d2(x, r)),
        )
        .with_kind(Dominating::General);
    sharp = sharp.with_breaks(nu.breaks().to_vec());
    let label = format!("{}#", model.label);
    Ok(ModelSpec::new(b_sharp, sigma, gamma, sharp, &label))
}

/// Second-order expansion of E(S_t - S0 e^k)_+ under a martingale model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionExpansion {
    pub s0: f64,
    pub k: f64,
    pub t: f64,
    pub first_term: f64,
    pub second_term: f64,
    pub total: f64,
    pub p1_plain: f64,
    pub p2_plain: f64,
    pub p1_sharp: f64,
    pub p2_sharp: f64,
}

/// Fails with a calibration error when the martingale residual exceeds
/// [`MARTINGALE_GATE`] anywhere on the default grid.
pub fn martingale_gate(model: &ModelSpec) -> Result<()> {
    let (r, x) = martingale_sup_residual(model, &default_x_grid())?;
    if r > MARTINGALE_GATE || r.is_nan() {
        return Err(Error::Calibration { x, residual: r });
    }
    Ok(())
}

/// t S0 [P1#(0,k) - e^k P1(0,k)] + t²/2 S0 [P2#(0,k) - e^k P2(0,k)].
pub fn otm_price_expansion(
    model: &ModelSpec,
    s0: f64,
    k: f64,
    t: f64,
    trunc: &TruncationConfig,
) -> Result<OptionExpansion> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("log-moneyness must be positive, got {k}")));
    }
    if !(s0 > 0.0) {
        return Err(Error::Domain(format!("spot must be positive, got {s0}")));
    }
    martingale_gate(model)?;
    let sharp = share_transform(model)?;
    let plain = tail_expansion(model, trunc, 0.0, k, t)?;
    let hash = tail_expansion(&sharp, trunc, 0.0, k, t)?;
    let ek = k.exp();
    let first = t * s0 * (hash.p1 - ek * plain.p1);
    let second = 0.5 * t * t * s0 * (hash.p2 - ek * plain.p2);
    Ok(OptionExpansion {
        s0,
        k,
        t,
        first_term: first,
        second_term: second,
        total: first + second,
        p1_plain: plain.p1,
        p2_plain: plain.p2,
        p1_sharp: hash.p1,
        p2_sharp: hash.p2,
    })
}

/// t S0 ∫ (e^{γ(0,r)} - e^k)_+ ν(0,r) dr.
pub fn leading_term_direct(model: &ModelSpec, s0: f64, k: f64, t: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("log-moneyness must be positive, got {k}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let g = &model.gamma;
    let lo = g.inverse(0.0, k)?;
    let v = try_integrate_range(
        |r| {
            let v = g.eval(0.0, r);
            Ok(if v > k { -(k - v).exp_m1() * exp_times(v, model.nu.nu(0.0, r)) } else { 0.0 })
        },
        lo,
        f64::INFINITY,
        model.nu.breaks(),
        FINE_TOL,
    )?;
    Ok(t * s0 * v.value)
}

/// ν(0,κ) ≈ e^κ ∂²C/∂K² / t with S0 = 1.
pub fn implied_intensity_from_curvature(c_kk: f64, t: f64, kappa: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("maturity must be positive, got {t}")));
    }
    Ok(kappa.exp() * c_kk / t)
}

/// Coefficient of t²σ²/2 in the OTM call price for γ = r and constant σ:
/// S0 [e^k ν(0,k) + ∫_k^∞ (e^r + e^k)/2 ∂₁ν(0,r) dr + ∫_k^∞ (e^r - e^k)/2 ∂₁²ν(0,r) dr].
pub fn vol_effect_on_price(model: &ModelSpec, s0: f64, k: f64) -> Result<f64> {
    if !model.gamma.is_identity() {
        return Err(Error::Config("volatility effect on price requires γ(x,r) = r".into()));
    }
    if !(k > 0.0) {
        return Err(Error::Domain(format!("log-moneyness must be positive, got {k}")));
    }
    let nu = &model.nu;
    let ek = k.exp();
    let tail = try_integrate_range(
        |r| {
            let (d1, d11) = (nu.d1(0.0, r), nu.d11(0.0, r));
            Ok(0.5 * (exp_times(r, d1 + d11) + ek * (d1 - d11)))
        },
        k,
        f64::INFINITY,
        nu.breaks(),
        FINE_TOL,
    )?;
    Ok(s0 * (ek * nu.nu(0.0, k) + tail.value))
}
