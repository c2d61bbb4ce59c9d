//! Built-in model families.

use crate::error::{Error, Result};
use crate::model::{arctan_factor, Dominating, JumpIntensity, JumpTransform, ModelSpec, SmoothField};
use crate::sharemeasure::calibrate_drift;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftSpec {
    /// b(x) = amplitude · sin x
    Sine { amplitude: f64 },
    Constant(f64),
    /// b solves the martingale condition for e^X.
    Martingale,
}

/// σ(x) = level + sine · sin x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSpec {
    pub level: f64,
    pub sine: f64,
}

impl SigmaSpec {
    pub fn field(&self) -> SmoothField {
        let (l, s) = (self.level, self.sine);
        if s == 0.0 {
            return SmoothField::constant(l);
        }
        SmoothField::analytic(
            move |x| l + s * x.sin(),
            move |n, x| {
                s * match n % 4 {
                    1 => x.cos(),
                    2 => -x.sin(),
                    3 => -x.cos(),
                    _ => x.sin(),
                }
            },
        )
    }
}

fn sine_field(a: f64) -> SmoothField {
    SigmaSpec { level: 0.0, sine: a }.field()
}

fn stable_like(c: SmoothField, scale: f64, alpha: f64, tempering: f64, drift: DriftSpec, sigma: SigmaSpec, label: &str) -> Result<ModelSpec> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Config(format!("stability index must lie in (0, 2), got {alpha}")));
    }
    if !(tempering >= 0.0) {
        return Err(Error::Config(format!("tempering rate must be non-negative, got {tempering}")));
    }
    let nu = JumpIntensity::state_scaled(c, alpha, scale, tempering);
    let gamma = JumpTransform::identity();
    let sig = sigma.field();
    let b = match drift {
        DriftSpec::Sine { amplitude } => sine_field(amplitude),
        DriftSpec::Constant(c) => SmoothField::constant(c),
        DriftSpec::Martingale => calibrate_drift(&sig, &gamma, &nu)?,
    };
    Ok(ModelSpec::new(b, sig, gamma, nu, label))
}

/// γ(x,r) = r, ν(x,r) = c(x) e^{-λ|r|} |r|^{-1-α} with
/// c(x) = arctan(x)/(2π) + 3/4.
pub fn arctan_stable(alpha: f64, tempering: f64, drift: DriftSpec, sigma: SigmaSpec, label: &str) -> Result<ModelSpec> {
    stable_like(arctan_factor(), 1.0, alpha, tempering, drift, sigma, label)
}

/// State-free jumps: ν(x,r) = h(r) = scale e^{-λ|r|} |r|^{-1-α}, γ = r.
pub fn tempered_stable(alpha: f64, tempering: f64, scale: f64, drift: DriftSpec, sigma: SigmaSpec, label: &str) -> Result<ModelSpec> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config(format!("jump scale must be positive, got {scale}")));
    }
    stable_like(SmoothField::constant(1.0), scale, alpha, tempering, drift, sigma, label)
}

/// b = sin x, σ = 1/2 + sin(x)/4, γ = r, ν = c(x)|r|^{-2.01}.
pub fn model_a() -> ModelSpec {
    arctan_stable(1.01, 0.0, DriftSpec::Sine { amplitude: 1.0 }, SigmaSpec { level: 0.5, sine: 0.25 }, "modelA")
        .expect("model A parameters are valid")
}

/// Tempered variant of model A: h = e^{-2|r|}|r|^{-2.01}, σ = 1/2, and the
/// martingale drift.
pub fn model_b() -> ModelSpec {
    arctan_stable(1.01, 2.0, DriftSpec::Martingale, SigmaSpec { level: 0.5, sine: 0.0 }, "modelB")
        .expect("model B parameters are valid")
}

/// Jumps of size uniform on [-hi,-lo] ∪ [lo,hi] at total rate `rate`,
/// independent of the state.
pub fn compound_poisson(rate: f64, lo: f64, hi: f64, b: f64, sigma: f64, label: &str) -> Result<ModelSpec> {
    if !(rate >= 0.0 && lo > 0.0 && hi > lo) {
        return Err(Error::Config(format!(
            "compound Poisson needs rate >= 0 and 0 < lo < hi, got rate {rate}, lo {lo}, hi {hi}"
        )));
    }
    let dens = rate / (2.0 * (hi - lo));
    let p = move |r: f64| {
        let a = r.abs();
        if a >= lo && a <= hi {
            dens
        } else {
            0.0
        }
    };
    let nu = JumpIntensity::new(move |_, r| p(r), p, None)
        .with_partials(|_, _| 0.0, |_, _| 0.0, |_, _| 0.0)
        .with_breaks(vec![-hi, -lo, lo, hi])
        .with_kind(Dominating::General);
    Ok(ModelSpec::new(
        SmoothField::constant(b),
        SmoothField::constant(sigma),
        JumpTransform::identity(),
        nu,
        label,
    ))
}

/// Pure diffusion with constant coefficients.
pub fn diffusion(b: f64, sigma: f64, label: &str) -> ModelSpec {
    ModelSpec::new(
        SmoothField::constant(b),
        SmoothField::constant(sigma),
        JumpTransform::identity(),
        JumpIntensity::zero(),
        label,
    )
}

pub fn by_label(label: &str) -> Option<ModelSpec> {
    match label {
        "modelA" => Some(model_a()),
        "modelB" => Some(model_b()),
        _ => None,
    }
}
