//! Model description: coefficient functions with derivatives and
//! inverses, assumption checks, thinning and truncation-derived quantities.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{check_finite, Error, Result};
use crate::quadrature::{try_integrate_punctured, try_integrate_range, try_integrate_shells, QuadratureResult, Tol};
use crate::roots::{solve_increasing, ROOT_TOL};

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type DerivFn = Arc<dyn Fn(u32, f64) -> f64 + Send + Sync>;

/// Accuracy of one-dimensional integrals used as building blocks.
pub(crate) const INNER_TOL: Tol = Tol::new(1e-13, 1e-12);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

fn fd_step(order: u32, x: f64) -> f64 {
    let scale = x.abs().max(1.0);
    match order {
        1 => 1e-5 * scale,
        2 => 1e-4 * scale,
        _ => 1e-2 * scale,
    }
}

/// Central difference of order 1..=4.
pub(crate) fn central_diff(f: &dyn Fn(f64) -> f64, n: u32, x: f64) -> f64 {
    let h = fd_step(n, x);
    match n {
        0 => f(x),
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        3 => (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h),
        _ => {
            (f(x + 2.0 * h) - 4.0 * f(x + h) + 6.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h))
                / (h * h * h * h)
        }
    }
}

/// A scalar coefficient function of the state with derivatives up to order 4.
#[derive(Clone)]
pub struct SmoothField {
    eval: Fn1,
    derivs: Option<DerivFn>,
}

impl SmoothField {
    /// Derivatives by central differences.
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            derivs: None,
        }
    }

    /// `d(n, x)` must return the n-th derivative for 1 <= n <= 4.
    pub fn analytic(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d: impl Fn(u32, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(f),
            derivs: Some(Arc::new(d)),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::analytic(move |_| c, |_, _| 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn deriv(&self, n: u32, x: f64) -> f64 {
        if n == 0 {
            return self.eval(x);
        }
        match &self.derivs {
            Some(d) => d(n, x),
            None => central_diff(&|z| (self.eval)(z), n.min(4), x),
        }
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        if self.derivs.is_some() {
            DerivativeMode::Analytic
        } else {
            DerivativeMode::FiniteDifference
        }
    }
}

impl fmt::Debug for SmoothField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothField")
            .field("mode", &self.derivative_mode())
            .finish()
    }
}

/// First and second partials of r = γ⁻¹(x, y), from implicit differentiation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseDerivs {
    pub r: f64,
    pub r_x: f64,
    pub r_y: f64,
    pub r_xx: f64,
    pub r_xy: f64,
    pub r_yy: f64,
}

/// The jump transform γ(x, r), strictly increasing in r with γ(x, 0) = 0.
#[derive(Clone)]
pub struct JumpTransform {
    eval: Fn2,
    d1: Option<Fn2>,
    d2: Option<Fn2>,
    d11: Option<Fn2>,
    d22: Option<Fn2>,
    d12: Option<Fn2>,
    inverse: Option<Fn2>,
    bar: Option<Fn2>,
    identity: bool,
}

impl JumpTransform {
    /// Partials by finite differences, inverses by root-finding.
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            d1: None,
            d2: None,
            d11: None,
            d22: None,
            d12: None,
            inverse: None,
            bar: None,
            identity: false,
        }
    }

    /// γ(x, r) = r.
    pub fn identity() -> Self {
        let zero: Fn2 = Arc::new(|_, _| 0.0);
        Self {
            eval: Arc::new(|_, r| r),
            d1: Some(zero.clone()),
            d2: Some(Arc::new(|_, _| 1.0)),
            d11: Some(zero.clone()),
            d22: Some(zero.clone()),
            d12: Some(zero),
            inverse: Some(Arc::new(|_, y| y)),
            bar: Some(Arc::new(|u, r| u - r)),
            identity: true,
        }
    }

    /// γ(x, r) = r (1 + k tanh x), |k| < 1. Inverses are left to the
    /// root-finder.
    pub fn tanh_scaled(k: f64) -> Self {
        let sech2 = |x: f64| {
            let c = x.cosh();
            1.0 / (c * c)
        };
        Self::new(move |x, r| r * (1.0 + k * x.tanh())).with_partials(
            move |x, r| r * k * sech2(x),
            move |x, _| 1.0 + k * x.tanh(),
            move |x, r| -2.0 * r * k * sech2(x) * x.tanh(),
            |_, _| 0.0,
            move |x, _| k * sech2(x),
        )
    }

    /// Analytic partials ∂₁γ, ∂₂γ, ∂₁²γ, ∂₂²γ, ∂₁∂₂γ.
    pub fn with_partials(
        mut self,
        d1: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        d11: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        d22: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        d12: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.d1 = Some(Arc::new(d1));
        self.d2 = Some(Arc::new(d2));
        self.d11 = Some(Arc::new(d11));
        self.d22 = Some(Arc::new(d22));
        self.d12 = Some(Arc::new(d12));
        self
    }

    /// Analytic inverse in r: y ↦ γ⁻¹(x, y).
    pub fn with_inverse(mut self, inv: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.inverse = Some(Arc::new(inv));
        self
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn has_analytic_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn eval(&self, x: f64, r: f64) -> f64 {
        (self.eval)(x, r)
    }

    fn fd_x(&self, n: u32, x: f64, r: f64) -> f64 {
        central_diff(&|z| (self.eval)(z, r), n, x)
    }

    fn fd_r(&self, n: u32, x: f64, r: f64) -> f64 {
        central_diff(&|z| (self.eval)(x, z), n, r)
    }

    pub fn d1(&self, x: f64, r: f64) -> f64 {
        match &self.d1 {
            Some(f) => f(x, r),
            None => self.fd_x(1, x, r),
        }
    }

    pub fn d2(&self, x: f64, r: f64) -> f64 {
        match &self.d2 {
            Some(f) => f(x, r),
            None => self.fd_r(1, x, r),
        }
    }

    pub fn d11(&self, x: f64, r: f64) -> f64 {
        match &self.d11 {
            Some(f) => f(x, r),
            None => self.fd_x(2, x, r),
        }
    }

    pub fn d22(&self, x: f64, r: f64) -> f64 {
        match &self.d22 {
            Some(f) => f(x, r),
            None => self.fd_r(2, x, r),
        }
    }

    pub fn d12(&self, x: f64, r: f64) -> f64 {
        match &self.d12 {
            Some(f) => f(x, r),
            None => {
                let h = fd_step(2, x);
                let k = fd_step(2, r);
                let g = |a: f64, b: f64| (self.eval)(a, b);
                (g(x + h, r + k) - g(x + h, r - k) - g(x - h, r + k) + g(x - h, r - k)) / (4.0 * h * k)
            }
        }
    }

    /// r with γ(x, r) = y.
    pub fn inverse(&self, x: f64, y: f64) -> Result<f64> {
        if let Some(inv) = &self.inverse {
            return check_finite("gamma inverse", y, inv(x, y));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let slope = self.d2(x, 0.0);
        let guess = if slope.is_finite() && slope > 0.0 { y / slope } else { y };
        let step = guess.abs().max(1e-3) * 0.25;
        solve_increasing(
            |r| Ok(self.eval(x, r)),
            y,
            guess,
            step,
            ROOT_TOL * y.abs().max(1.0),
        )
    }

    /// z with z + γ(z, r) = u.
    pub fn bar(&self, u: f64, r: f64) -> Result<f64> {
        if let Some(b) = &self.bar {
            return check_finite("gamma bar", u, b(u, r));
        }
        if r == 0.0 {
            return Ok(u);
        }
        let guess = u - self.eval(u, r);
        let step = self.eval(u, r).abs().max(1e-3) * 0.25;
        solve_increasing(
            |z| Ok(z + self.eval(z, r)),
            u,
            guess,
            step,
            ROOT_TOL * u.abs().max(1.0),
        )
    }

    /// γ⁻¹(x, y) together with its first and second partials.
    pub fn inverse_partials(&self, x: f64, y: f64) -> Result<InverseDerivs> {
        let r = self.inverse(x, y)?;
        let gr = self.d2(x, r);
        let gx = self.d1(x, r);
        let gxx = self.d11(x, r);
        let grr = self.d22(x, r);
        let gxr = self.d12(x, r);
        let r_y = 1.0 / gr;
        let r_x = -gx / gr;
        let r_yy = -grr / (gr * gr * gr);
        let r_xy = -(gxr + grr * r_x) * r_y / gr;
        let r_xx = -(gxx + 2.0 * gxr * r_x + grr * r_x * r_x) / gr;
        Ok(InverseDerivs {
            r,
            r_x,
            r_y,
            r_xx,
            r_xy,
            r_yy,
        })
    }
}

impl fmt::Debug for JumpTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpTransform")
            .field("identity", &self.identity)
            .field("analytic_inverse", &self.inverse.is_some())
            .finish()
    }
}

/// Shape of the dominating density h, used by samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dominating {
    /// h(r) = scale |r|^{-1-α}
    PowerLaw { scale: f64 },
    /// Anything else; sampled from a tabulated tail function.
    General,
}

/// The jump intensity ν(x, r) with its dominating Lévy density h(r).
#[derive(Clone)]
pub struct JumpIntensity {
    nu: Fn2,
    d1: Option<Fn2>,
    d11: Option<Fn2>,
    d2: Option<Fn2>,
    h: Fn1,
    alpha: Option<f64>,
    kind: Dominating,
    breaks: Vec<f64>,
}

impl JumpIntensity {
    /// Partials by finite differences. `alpha` is the stability index of
    /// h near the origin, `None` for finite-activity intensities.
    pub fn new(
        nu: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        alpha: Option<f64>,
    ) -> Self {
        Self {
            nu: Arc::new(nu),
            d1: None,
            d11: None,
            d2: None,
            h: Arc::new(h),
            alpha,
            kind: Dominating::General,
            breaks: Vec::new(),
        }
    }

    /// ν(x, r) = c(x) scale |r|^{-1-α} dominated by scale |r|^{-1-α}.
    pub fn state_scaled_power_law(c: SmoothField, alpha: f64, scale: f64) -> Self {
        Self::state_scaled(c, alpha, scale, 0.0)
    }

    /// ν(x, r) = c(x) h(r) with h(r) = scale e^{-rate |r|} |r|^{-1-α}.
    /// Requires c <= 1.
    pub fn state_scaled(c: SmoothField, alpha: f64, scale: f64, rate: f64) -> Self {
        let p = -1.0 - alpha;
        let h = move |r: f64| {
            let a = r.abs();
            scale * (-rate * a).exp() * a.powf(p)
        };
        let dh = move |r: f64| {
            let a = r.abs();
            let v = scale * (-rate * a).exp() * a.powf(p);
            v * (p / a - rate) * r.signum()
        };
        let (c0, c1, c2) = (c.clone(), c.clone(), c.clone());
        let kind = if rate == 0.0 {
            Dominating::PowerLaw { scale }
        } else {
            Dominating::General
        };
        let mut out = Self::new(move |x, r| c0.eval(x) * h(r), h, Some(alpha))
            .with_partials(
                move |x, r| c1.deriv(1, x) * h(r),
                move |x, r| c2.deriv(2, x) * h(r),
                move |x, r| c.eval(x) * dh(r),
            );
        out.kind = kind;
        out
    }

    /// Analytic ∂₁ν, ∂₁²ν and ∂₂ν.
    pub fn with_partials(
        mut self,
        d1: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        d11: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.d1 = Some(Arc::new(d1));
        self.d11 = Some(Arc::new(d11));
        self.d2 = Some(Arc::new(d2));
        self
    }

    /// Points in r where ν or h is not smooth; quadrature splits there.
    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn with_kind(mut self, kind: Dominating) -> Self {
        self.kind = kind;
        self
    }

    /// ν ≡ 0.
    pub fn zero() -> Self {
        Self::new(|_, _| 0.0, |_| 0.0, None).with_partials(|_, _| 0.0, |_, _| 0.0, |_, _| 0.0)
    }

    pub fn nu(&self, x: f64, r: f64) -> f64 {
        (self.nu)(x, r)
    }

    pub fn d1(&self, x: f64, r: f64) -> f64 {
        match &self.d1 {
            Some(f) => f(x, r),
            None => central_diff(&|z| (self.nu)(z, r), 1, x),
        }
    }

    pub fn d11(&self, x: f64, r: f64) -> f64 {
        match &self.d11 {
            Some(f) => f(x, r),
            None => central_diff(&|z| (self.nu)(z, r), 2, x),
        }
    }

    pub fn d2(&self, x: f64, r: f64) -> f64 {
        match &self.d2 {
            Some(f) => f(x, r),
            None => {
                let h = 1e-5 * r.abs().max(1e-3);
                ((self.nu)(x, r + h) - (self.nu)(x, r - h)) / (2.0 * h)
            }
        }
    }

    pub fn h(&self, r: f64) -> f64 {
        (self.h)(r)
    }

    /// ν̄ = ν / h.
    pub fn nu_bar(&self, x: f64, r: f64) -> f64 {
        self.nu(x, r) / self.h(r)
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// g(r) = h(r) |r|^{α+1}.
    pub fn g(&self, r: f64) -> Option<f64> {
        self.alpha.map(|a| self.h(r) * r.abs().powf(a + 1.0))
    }

    pub fn kind(&self) -> Dominating {
        self.kind
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }
}

impl fmt::Debug for JumpIntensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpIntensity")
            .field("alpha", &self.alpha)
            .field("kind", &self.kind)
            .finish()
    }
}

/// A state-dependent jump-diffusion with generator
/// b f' + σ²/2 f'' + ∫ (f(x+γ) - f - 1{|r|<=1} γ f') ν dr.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub b: SmoothField,
    pub sigma: SmoothField,
    pub gamma: JumpTransform,
    pub nu: JumpIntensity,
    pub label: String,
}

impl ModelSpec {
    pub fn new(b: SmoothField, sigma: SmoothField, gamma: JumpTransform, nu: JumpIntensity, label: &str) -> Self {
        Self {
            b,
            sigma,
            gamma,
            nu,
            label: label.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationKind {
    /// 1{|r| > ε}
    Sharp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    pub eps: f64,
    pub kind: TruncationKind,
}

impl TruncationConfig {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("truncation level must be positive, got {eps}")));
        }
        Ok(Self {
            eps,
            kind: TruncationKind::Sharp,
        })
    }

    pub fn is_large(&self, r: f64) -> bool {
        r.abs() > self.eps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub witness: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub eta: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const DEFAULT_ETA: f64 = 1e-6;

/// 41 uniform points on [-5, 5].
pub fn default_x_grid() -> Vec<f64> {
    (0..41).map(|i| -5.0 + 0.25 * i as f64).collect()
}

/// 80 log-spaced magnitudes on [1e-4, 5], both signs.
pub fn default_r_grid() -> Vec<f64> {
    let (lo, hi) = (1e-4f64.ln(), 5f64.ln());
    let mut out = Vec::with_capacity(160);
    for i in 0..80 {
        let a = (lo + (hi - lo) * i as f64 / 79.0).exp();
        out.push(-a);
        out.push(a);
    }
    out.sort_by(f64::total_cmp);
    out
}

struct Tracker {
    name: &'static str,
    worst: f64,
    witness: Option<(f64, f64)>,
    minimize: bool,
}

impl Tracker {
    fn min(name: &'static str) -> Self {
        Self {
            name,
            worst: f64::INFINITY,
            witness: None,
            minimize: true,
        }
    }

    fn max(name: &'static str) -> Self {
        Self {
            name,
            worst: f64::NEG_INFINITY,
            witness: None,
            minimize: false,
        }
    }

    fn see(&mut self, v: f64, x: f64, r: f64) {
        let worse = if self.minimize { v < self.worst } else { v > self.worst };
        if worse {
            self.worst = v;
            self.witness = Some((x, r));
        }
    }

    fn finish(self, passed: impl Fn(f64) -> bool) -> Check {
        Check {
            name: self.name,
            passed: passed(self.worst),
            worst: self.worst,
            witness: self.witness,
        }
    }
}

fn finite(what: &'static str, x: f64, v: f64) -> Result<f64> {
    check_finite(what, x, v)
}

/// Pointwise check of the standing assumptions on the given grids.
pub fn validate_assumptions(model: &ModelSpec, x_grid: &[f64], r_grid: &[f64], eta: f64) -> Result<ValidationReport> {
    if x_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::Domain("validation grids must be non-empty".into()));
    }
    if r_grid.contains(&0.0) {
        return Err(Error::Domain("r grid must exclude 0".into()));
    }
    let nu = &model.nu;
    let gam = &model.gamma;
    let mut dom = Tracker::min("nu_dominated_by_h");
    let mut pos = Tracker::min("nu_bar_positive_near_0");
    let mut rdn = Tracker::max("r_dnu_bar_bounded_near_0");
    let mut dxn = Tracker::max("dx_nu_bar_bounded_near_0");
    let mut sig = Tracker::min("sigma_nondegenerate");
    let mut zero = Tracker::max("gamma_vanishes_at_0");
    let mut inc = Tracker::min("gamma_increasing");
    let mut dif = Tracker::min("one_plus_dx_gamma_away_from_0");
    let mut bsm = Tracker::max("b_sigma_finite");
    let mut glo = Tracker::min("g_bounded_below_near_0");
    let mut ghi = Tracker::max("g_bounded_above_near_0");
    let mut gd = Tracker::max("r_dg_bounded_near_0");

    let near = |r: f64| r.abs() <= 0.1;
    for &r in r_grid {
        let hr = finite("h", r, nu.h(r))?;
        if let Some(gv) = nu.g(r) {
            if near(r) {
                let gv = finite("g", r, gv)?;
                glo.see(gv, f64::NAN, r);
                ghi.see(gv, f64::NAN, r);
                let gfun = |z: f64| nu.g(z).unwrap_or(f64::NAN);
                let step = 1e-5 * r.abs();
                let dg = (gfun(r + step) - gfun(r - step)) / (2.0 * step);
                gd.see(finite("g'", r, (r * dg).abs())?, f64::NAN, r);
            }
        }
        for &x in x_grid {
            let v = finite("nu", r, nu.nu(x, r))?;
            if hr > 0.0 {
                dom.see(1.0 - v / hr, x, r);
                if near(r) {
                    pos.see(v / hr, x, r);
                    let step = 1e-5 * r.abs();
                    let nb = |z: f64| nu.nu(x, z) / nu.h(z);
                    let d = (nb(r + step) - nb(r - step)) / (2.0 * step);
                    rdn.see(finite("d nu_bar", r, (r * d).abs())?, x, r);
                    for i in 1..=2 {
                        let dx = central_diff(&|z| nu.nu(z, r) / hr, i, x);
                        dxn.see(finite("dx nu_bar", r, dx.abs())?, x, r);
                    }
                }
            } else if v > 0.0 {
                dom.see(f64::NEG_INFINITY, x, r);
            }
            inc.see(finite("d2 gamma", r, gam.d2(x, r))?, x, r);
            dif.see(finite("d1 gamma", r, (1.0 + gam.d1(x, r)).abs())?, x, r);
        }
    }
    for &x in x_grid {
        let s = finite("sigma", x, model.sigma.eval(x))?;
        sig.see(s, x, f64::NAN);
        let b = finite("b", x, model.b.eval(x))?;
        let mut m = b.abs().max(s.abs());
        for n in 1..=2 {
            m = m.max(finite("b'", x, model.b.deriv(n, x))?.abs());
            m = m.max(finite("sigma'", x, model.sigma.deriv(n, x))?.abs());
        }
        bsm.see(m, x, f64::NAN);
        zero.see(finite("gamma", x, gam.eval(x, 0.0))?.abs(), x, 0.0);
    }

    let mut checks = vec![
        dom.finish(|w| w >= -1e-12),
        sig.finish(|w| w >= eta),
        zero.finish(|w| w <= 1e-14),
        inc.finish(|w| w > eta),
        dif.finish(|w| w > eta),
        bsm.finish(|w| w.is_finite()),
    ];
    if pos.witness.is_some() {
        checks.push(pos.finish(|w| w > eta));
        checks.push(rdn.finish(|w| w.is_finite()));
        checks.push(dxn.finish(|w| w.is_finite()));
    }
    if glo.witness.is_some() {
        checks.push(glo.finish(|w| w > eta));
        checks.push(ghi.finish(|w| w.is_finite()));
        checks.push(gd.finish(|w| w.is_finite()));
    }
    Ok(ValidationReport { eta, checks })
}

/// θ(x, r, u) = 1{u < ν(x, r)/h(r)}.
pub fn thinning_indicator(model: &ModelSpec, x: f64, r: f64, u: f64) -> Result<bool> {
    if r == 0.0 {
        return Err(Error::Domain("thinning needs r != 0".into()));
    }
    let h = model.nu.h(r);
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::Domain(format!("dominating density h({r}) = {h}")));
    }
    Ok(u < model.nu.nu(x, r) / h)
}

pub fn gamma_inverse(model: &ModelSpec, x: f64, y: f64) -> Result<f64> {
    model.gamma.inverse(x, y)
}

pub fn gamma_bar(model: &ModelSpec, u: f64, r: f64) -> Result<f64> {
    model.gamma.bar(u, r)
}

/// λ_ε = ∫ 1{|r| > ε} h(r) dr.
pub fn lambda_eps(model: &ModelSpec, trunc: &TruncationConfig) -> Result<QuadratureResult> {
    let nu = &model.nu;
    try_integrate_punctured(|r| Ok(nu.h(r)), trunc.eps, nu.breaks(), INNER_TOL)
}

/// b_ε(x) = b(x) - ∫_{ε<|r|<=1} γ(x,r) ν(x,r) dr.
pub fn b_eps(model: &ModelSpec, trunc: &TruncationConfig, x: f64) -> Result<f64> {
    let corr = large_compensator(model, trunc.eps, x)?;
    Ok(model.b.eval(x) - corr)
}

/// ∫_{ε<|r|<=1} γ(x,r) ν(x,r) dr.
pub(crate) fn large_compensator(model: &ModelSpec, eps: f64, x: f64) -> Result<f64> {
    if eps >= 1.0 {
        return Ok(0.0);
    }
    let f = |r: f64| Ok(model.gamma.eval(x, r) * model.nu.nu(x, r));
    let br = model.nu.breaks();
    let right = try_integrate_range(f, eps, 1.0, br, INNER_TOL)?;
    let left = try_integrate_range(f, -1.0, -eps, br, INNER_TOL)?;
    Ok(right.value + left.value)
}

/// σ̂²_ε(x) = ∫ γ² ν 1{|γ| <= ε} dr.
pub fn sigma_hat_eps(model: &ModelSpec, trunc: &TruncationConfig, x: f64) -> Result<f64> {
    let g = &model.gamma;
    let hi = g.inverse(x, trunc.eps)?;
    let lo = g.inverse(x, -trunc.eps)?;
    let f = |r: f64| {
        let v = g.eval(x, r);
        Ok(v * v * model.nu.nu(x, r))
    };
    let right = try_integrate_shells(f, hi, INNER_TOL)?;
    let left = try_integrate_shells(|r| f(-r), -lo, INNER_TOL)?;
    Ok(right.value + left.value)
}

/// c(x) = arctan(x)/(2π) + 3/4, the state factor of the example intensity.
pub fn arctan_factor() -> SmoothField {
    SmoothField::analytic(
        |x| x.atan() / (2.0 * PI) + 0.75,
        |n, x| {
            let q = 1.0 + x * x;
            let v = match n {
                1 => 1.0 / q,
                2 => -2.0 * x / (q * q),
                3 => (6.0 * x * x - 2.0) / (q * q * q),
                _ => 24.0 * x * (1.0 - x * x) / (q * q * q * q),
            };
            v / (2.0 * PI)
        },
    )
}
