//! Second-order short-time expansion of P[X_t >= x + y].

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::model::{b_eps, InverseDerivs, ModelSpec, TruncationConfig, INNER_TOL};
use crate::quadrature::{kronrod_fixed, try_integrate_punctured, try_integrate_range, try_integrate_small, Tol};
use crate::roots::{solve_increasing, ROOT_TOL};

/// Accuracy of the coefficient-level integrals.
pub const COEFF_TOL: Tol = Tol::new(1e-10, 1e-9);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionResult {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub eps: f64,
    pub p1: f64,
    pub p2: f64,
    pub d_term: f64,
    pub j_term: f64,
    pub order1: f64,
    pub order2: f64,
    /// order2 clipped to [0, 1]; the raw value stays in `order2`.
    pub order2_clamped: f64,
    pub quadrature_error: f64,
}

impl ExpansionResult {
    fn assemble(x: f64, y: f64, t: f64, eps: f64, p1: f64, d: f64, j: f64, err: f64) -> Self {
        let p2 = d + j;
        let order1 = t * p1;
        let order2 = order1 + 0.5 * t * t * p2;
        Self {
            x,
            y,
            t,
            eps,
            p1,
            p2,
            d_term: d,
            j_term: j,
            order1,
            order2,
            order2_clamped: order2.clamp(0.0, 1.0),
            quadrature_error: err,
        }
    }

    pub fn order1_at(&self, t: f64) -> f64 {
        t * self.p1
    }

    pub fn order2_at(&self, t: f64) -> f64 {
        t * self.p1 + 0.5 * t * t * self.p2
    }
}

/// min(0.01, y/10).
pub fn default_eps(y: f64) -> f64 {
    (0.01f64).min(y / 10.0)
}

/// Passes iff |γ(x, ±ε)| < y/2 and γ⁻¹(x, y) > ε.
pub fn check_eps_compatible(model: &ModelSpec, trunc: &TruncationConfig, x: f64, y: f64) -> bool {
    if !(y > 0.0) {
        return false;
    }
    let g = &model.gamma;
    let e = trunc.eps;
    if g.eval(x, e).abs() >= 0.5 * y || g.eval(x, -e).abs() >= 0.5 * y {
        return false;
    }
    matches!(g.inverse(x, y), Ok(r) if r > e)
}

fn require_compatible(model: &ModelSpec, trunc: &TruncationConfig, x: f64, y: f64) -> Result<()> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("tail level must be positive, got {y}")));
    }
    if !check_eps_compatible(model, trunc, x, y) {
        return Err(Error::Config(format!(
            "truncation eps = {} too large for threshold y = {y} at x = {x}",
            trunc.eps
        )));
    }
    Ok(())
}

/// Integrals of ν(z, ·) restricted to {|r| > ε}.
pub(crate) struct Masses<'a> {
    pub model: &'a ModelSpec,
    pub eps: f64,
}

impl<'a> Masses<'a> {
    fn range(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        Ok(try_integrate_range(|r| Ok(f(r)), a, b, self.model.nu.breaks(), INNER_TOL)?.value)
    }

    /// ∫_L^∞ ν(z, r) 1{|r| > ε} dr.
    pub fn upper(&self, z: f64, l: f64) -> Result<f64> {
        let nu = |r: f64| self.model.nu.nu(z, r);
        let e = self.eps;
        if l >= e {
            self.range(nu, l, f64::INFINITY)
        } else if l <= -e {
            Ok(self.range(nu, l, -e)? + self.range(nu, e, f64::INFINITY)?)
        } else {
            self.range(nu, e, f64::INFINITY)
        }
    }

    /// ∫_{-∞}^U ν(z, r) 1{|r| > ε} dr.
    pub fn lower(&self, z: f64, u: f64) -> Result<f64> {
        let nu = |r: f64| self.model.nu.nu(z, r);
        let e = self.eps;
        if u <= -e {
            self.range(nu, f64::NEG_INFINITY, u)
        } else if u >= e {
            Ok(self.range(nu, f64::NEG_INFINITY, -e)? + self.range(nu, e, u)?)
        } else {
            self.range(nu, f64::NEG_INFINITY, -e)
        }
    }

    /// ∫_L^∞ ∂₁ⁿν(z, r) dr for L > ε.
    pub fn upper_dx(&self, n: u32, z: f64, l: f64) -> Result<f64> {
        let nu = &self.model.nu;
        match n {
            1 => self.range(|r| nu.d1(z, r), l, f64::INFINITY),
            _ => self.range(|r| nu.d11(z, r), l, f64::INFINITY),
        }
    }
}

/// s = q - γ̄(q, r), i.e. the root of s = γ(q - s, r), by Newton from
/// γ(q, r). Solving for s rather than γ̄ keeps full relative precision
/// when r is tiny.
fn landing_offset(g: &crate::model::JumpTransform, q: f64, r: f64) -> Result<f64> {
    if g.is_identity() {
        return Ok(r);
    }
    let mut s = g.eval(q, r);
    for _ in 0..60 {
        let step = (s - g.eval(q - s, r)) / (1.0 + g.d1(q - s, r));
        s -= step;
        if step.abs() <= 4.0 * f64::EPSILON * s.abs() || step == 0.0 {
            return Ok(s);
        }
    }
    Err(Error::NoConvergence(format!("landing offset for q = {q}, r = {r}")))
}

struct General<'a> {
    m: &'a ModelSpec,
    masses: Masses<'a>,
    x: f64,
    y: f64,
    q: f64,
    ip: InverseDerivs,
    err: Cell<f64>,
}

impl<'a> General<'a> {
    fn new(m: &'a ModelSpec, trunc: &TruncationConfig, x: f64, y: f64) -> Result<Self> {
        require_compatible(m, trunc, x, y)?;
        let ip = m.gamma.inverse_partials(x, y)?;
        Ok(Self {
            m,
            masses: Masses { model: m, eps: trunc.eps },
            x,
            y,
            q: x + y,
            ip,
            err: Cell::new(0.0),
        })
    }

    fn eps(&self) -> f64 {
        self.masses.eps
    }

    fn note(&self, e: f64) {
        self.err.set(self.err.get() + e);
    }

    fn p1(&self) -> Result<f64> {
        self.masses.upper(self.x, self.ip.r)
    }

    fn d(&self) -> Result<f64> {
        let (m, x, q) = (self.m, self.x, self.q);
        let nu = &m.nu;
        let ip = &self.ip;
        let r = ip.r;
        let gp = ip.r_x - ip.r_y;
        let gpp = ip.r_xx - 2.0 * ip.r_xy + ip.r_yy;
        let trunc = TruncationConfig::new(self.eps())?;
        let bx = b_eps(m, &trunc, x)?;
        let bq = b_eps(m, &trunc, q)?;
        let sx = m.sigma.eval(x);
        let sq = m.sigma.eval(q);
        let v = nu.nu(x, r);
        let v1 = nu.d1(x, r);
        let v2 = nu.d2(x, r);
        let i1 = self.masses.upper_dx(1, x, r)?;
        let i11 = self.masses.upper_dx(2, x, r)?;
        let drift = bx * (-v * gp + i1);
        let vol = 0.5 * sx * sx * (-v2 * gp * gp - 2.0 * v1 * gp + i11 - v * gpp);
        let landing = (bq - sq * m.sigma.deriv(1, q)) * v * ip.r_y;
        let curvature = -0.5 * sq * sq * (v2 * ip.r_y * ip.r_y + v * ip.r_yy);
        Ok(drift + vol + landing + curvature)
    }

    /// F''(z) for F(z) = ∫_{g(z)}^∞ ν_ε(z, r) dr, g(z) = γ⁻¹(z, q - z).
    fn f_second(&self, z: f64) -> Result<f64> {
        let nu = &self.m.nu;
        let ip = self.m.gamma.inverse_partials(z, self.q - z)?;
        let g = ip.r;
        let gp = ip.r_x - ip.r_y;
        let gpp = ip.r_xx - 2.0 * ip.r_xy + ip.r_yy;
        let tail = self.masses.upper_dx(2, z, g)?;
        Ok(-nu.d2(z, g) * gp * gp - 2.0 * nu.d1(z, g) * gp - nu.nu(z, g) * gpp + tail)
    }

    /// Small jump followed by a large one:
    /// ∫ [F(x+γ) - F(x) - γ F'(x)] ν̄_ε(x, r) dr, with the bracket written as
    /// ∫_0^γ (γ - u) F''(x + u) du.
    fn j_small_then_large(&self) -> Result<f64> {
        let (m, x) = (self.m, self.x);
        let f = |r: f64| -> Result<f64> {
            let s = m.gamma.eval(x, r);
            let taylor = kronrod_fixed(|u| Ok((s - u) * self.f_second(x + u)?), 0.0, s)?;
            Ok(taylor * m.nu.nu(x, r))
        };
        let res = try_integrate_small(f, self.eps(), COEFF_TOL)?;
        self.note(res.abs_error_estimate);
        Ok(res.value)
    }

    /// Large jump landing near the threshold followed by a small one.
    fn j_large_then_small(&self) -> Result<f64> {
        let (m, x, q) = (self.m, self.x, self.q);
        let g = &m.gamma;
        let density = |eta: f64| -> Result<f64> {
            let rho = g.inverse(x, eta - x)?;
            Ok(m.nu.nu(x, rho) / g.d2(x, rho))
        };
        let mq = density(q)?;
        let f = |r: f64| -> Result<f64> {
            let s = landing_offset(g, q, r)?;
            let phi_q = mq * m.nu.nu(q, r);
            let inner = kronrod_fixed(|u| Ok(density(q - u)? * m.nu.nu(q - u, r) - phi_q), 0.0, s)?;
            Ok(inner + phi_q * (g.eval(q - s, r) - g.eval(q, r)))
        };
        let res = try_integrate_small(f, self.eps(), COEFF_TOL)?;
        self.note(res.abs_error_estimate);
        Ok(res.value)
    }

    /// Outer jump sizes r1 at which γ⁻¹(w, q - w) crosses `level`,
    /// w = x + γ(x, r1).
    fn crossing(&self, level: f64) -> Option<f64> {
        let (g, x, y) = (&self.m.gamma, self.x, self.y);
        let phi = |r1: f64| {
            let s = g.eval(x, r1);
            Ok(s + g.eval(x + s, level))
        };
        solve_increasing(phi, y, self.ip.r - level, 0.25, ROOT_TOL).ok()
    }

    /// Two large jumps, with the compensating products folded in:
    /// ∫ ν_ε(x, r1) [T(w, L) - P1 - 1{r1 >= R} Λ(w)] dr1.
    fn j_two_large(&self, p1: f64) -> Result<f64> {
        let (m, x, q) = (self.m, self.x, self.q);
        let rr = self.ip.r;
        let mut breaks: Vec<f64> = vec![rr];
        let levels: Vec<f64> = [self.eps(), -self.eps()]
            .into_iter()
            .chain(m.nu.breaks().iter().copied())
            .collect();
        for lv in levels {
            if let Some(b) = self.crossing(lv) {
                breaks.push(b);
            }
        }
        breaks.extend_from_slice(m.nu.breaks());
        let f = |r1: f64| -> Result<f64> {
            let w = x + m.gamma.eval(x, r1);
            let l = m.gamma.inverse(w, q - w)?;
            let beyond = if r1 < rr {
                self.masses.upper(w, l)?
            } else {
                -self.masses.lower(w, l)?
            };
            Ok(m.nu.nu(x, r1) * (beyond - p1))
        };
        let res = try_integrate_punctured(f, self.eps(), &breaks, COEFF_TOL)?;
        self.note(res.abs_error_estimate);
        Ok(res.value)
    }

    fn j(&self, p1: f64) -> Result<f64> {
        Ok(self.j_small_then_large()? + self.j_large_then_small()? + self.j_two_large(p1)?)
    }
}

/// P1(x, y) = ∫_{γ(x,r) >= y} ν_ε(x, r) dr.
pub fn p1(model: &ModelSpec, trunc: &TruncationConfig, x: f64, y: f64) -> Result<f64> {
    General::new(model, trunc, x, y)?.p1()
}

/// Diffusive part of the second-order coefficient.
pub fn d_term(model: &ModelSpec, trunc: &TruncationConfig, x: f64, y: f64) -> Result<f64> {
    General::new(model, trunc, x, y)?.d()
}

/// Jump-interaction part of the second-order coefficient.
pub fn j_term(model: &ModelSpec, trunc: &TruncationConfig, x: f64, y: f64) -> Result<f64> {
    let ctx = General::new(model, trunc, x, y)?;
    let p1 = ctx.p1()?;
    ctx.j(p1)
}

/// t P1 + t²/2 P2 for general γ.
pub fn tail_expansion(model: &ModelSpec, trunc: &TruncationConfig, x: f64, y: f64, t: f64) -> Result<ExpansionResult> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    let ctx = General::new(model, trunc, x, y)?;
    let p1 = ctx.p1()?;
    let d = ctx.d()?;
    let j = ctx.j(p1)?;
    Ok(ExpansionResult::assemble(x, y, t, trunc.eps, p1, d, j, ctx.err.get()))
}

struct Identity<'a> {
    m: &'a ModelSpec,
    masses: Masses<'a>,
    x: f64,
    y: f64,
    err: Cell<f64>,
}

impl<'a> Identity<'a> {
    fn new(m: &'a ModelSpec, trunc: &TruncationConfig, x: f64, y: f64) -> Result<Self> {
        if !m.gamma.is_identity() {
            return Err(Error::Config("identity specialization called on a model with γ(x,r) != r".into()));
        }
        require_compatible(m, trunc, x, y)?;
        Ok(Self {
            m,
            masses: Masses { model: m, eps: trunc.eps },
            x,
            y,
            err: Cell::new(0.0),
        })
    }

    fn eps(&self) -> f64 {
        self.masses.eps
    }

    fn p1(&self) -> Result<f64> {
        self.masses.upper(self.x, self.y)
    }

    fn d(&self) -> Result<f64> {
        let (m, x, y) = (self.m, self.x, self.y);
        let nu = &m.nu;
        let trunc = TruncationConfig::new(self.eps())?;
        let bx = b_eps(m, &trunc, x)?;
        let bq = b_eps(m, &trunc, x + y)?;
        let sx = m.sigma.eval(x);
        let sq = m.sigma.eval(x + y);
        let v = nu.nu(x, y);
        let i1 = self.masses.upper_dx(1, x, y)?;
        let i11 = self.masses.upper_dx(2, x, y)?;
        Ok(bx * (v + i1)
            + 0.5 * sx * sx * (-nu.d2(x, y) + 2.0 * nu.d1(x, y) + i11)
            + (bq - sq * m.sigma.deriv(1, x + y)) * v
            - 0.5 * sq * sq * nu.d2(x, y))
    }

    fn j(&self, p1: f64) -> Result<f64> {
        let (m, x, y) = (self.m, self.x, self.y);
        let nu = &m.nu;
        // G(u) = ∫_{y-u}^∞ ν(x+u, r1) dr1
        let g2 = |u: f64| -> Result<f64> {
            let (z, l) = (x + u, y - u);
            Ok(2.0 * nu.d1(z, l) - nu.d2(z, l) + self.masses.upper_dx(2, z, l)?)
        };
        let line1 = try_integrate_small(
            |r| Ok(nu.nu(x, r) * kronrod_fixed(|u| Ok((r - u) * g2(u)?), 0.0, r)?),
            self.eps(),
            COEFF_TOL,
        )?;
        let line2 = try_integrate_small(
            |r| {
                let phi = |s: f64| nu.nu(x, s) * nu.nu(x + s, r);
                let py = phi(y);
                kronrod_fixed(|s| Ok(phi(s) - py), y - r, y)
            },
            self.eps(),
            COEFF_TOL,
        )?;
        let e = self.eps();
        let mut breaks = vec![y, y - e, y + e];
        for &b in nu.breaks() {
            breaks.push(b);
            breaks.push(y - b);
        }
        let rest = try_integrate_punctured(
            |r1| {
                let (w, l) = (x + r1, y - r1);
                let beyond = if r1 < y {
                    self.masses.upper(w, l)?
                } else {
                    -self.masses.lower(w, l)?
                };
                Ok(nu.nu(x, r1) * (beyond - p1))
            },
            e,
            &breaks,
            COEFF_TOL,
        )?;
        self.err
            .set(line1.abs_error_estimate + line2.abs_error_estimate + rest.abs_error_estimate);
        Ok(line1.value + line2.value + rest.value)
    }
}

/// The expansion specialized to γ(x, r) = r.
pub fn tail_expansion_identity_r(
    model: &ModelSpec,
    trunc: &TruncationConfig,
    x: f64,
    y: f64,
    t: f64,
) -> Result<ExpansionResult> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    let ctx = Identity::new(model, trunc, x, y)?;
    let p1 = ctx.p1()?;
    let d = ctx.d()?;
    let j = ctx.j(p1)?;
    Ok(ExpansionResult::assemble(x, y, t, trunc.eps, p1, d, j, ctx.err.get()))
}

fn tail_dx(model: &ModelSpec, n: u32, x: f64, y: f64) -> Result<f64> {
    let masses = Masses { model, eps: 0.0 };
    if !(y > 0.0) {
        return Err(Error::Domain(format!("tail level must be positive, got {y}")));
    }
    masses.upper_dx(n, x, y)
}

/// 2ν(x,y) + ∫_y^∞ ∂₁ν(x,r) dr, the coefficient of t² b / 2 for constant b.
pub fn drift_sensitivity(model: &ModelSpec, x: f64, y: f64) -> Result<f64> {
    Ok(2.0 * model.nu.nu(x, y) + tail_dx(model, 1, x, y)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolFunctional {
    /// -∂₂ν(x,y) + ½ ∫_y^∞ ∂₁²ν(x,r) dr (constant σ, coefficient of t²σ²/2).
    Bracket,
    /// Λ(x,y) = -∂_y(ν(x,y)(σ²(x)+σ²(x+y))/2) + σ²(x)/2 ∫_y^∞ ∂₁²ν(x,r) dr.
    Lambda,
}

/// The volatility functional in its customary form.
pub fn vol_sensitivity(model: &ModelSpec, x: f64, y: f64, which: VolFunctional) -> Result<f64> {
    let nu = &model.nu;
    let i11 = tail_dx(model, 2, x, y)?;
    Ok(match which {
        VolFunctional::Bracket => -nu.d2(x, y) + 0.5 * i11,
        VolFunctional::Lambda => {
            let (sx, sq) = (model.sigma.eval(x), model.sigma.eval(x + y));
            let dsq = sq * model.sigma.deriv(1, x + y);
            -(nu.d2(x, y) * 0.5 * (sx * sx + sq * sq) + nu.nu(x, y) * dsq) + 0.5 * sx * sx * i11
        }
    })
}

/// The volatility functional including the state cross term
/// ∂₁ν(x,y) (times σ²(x) for `Lambda`), i.e. the exact σ-dependence of P2
/// when γ(x, r) = r.
pub fn vol_sensitivity_exact(model: &ModelSpec, x: f64, y: f64, which: VolFunctional) -> Result<f64> {
    let base = vol_sensitivity(model, x, y, which)?;
    let cross = model.nu.d1(x, y);
    Ok(match which {
        VolFunctional::Bracket => base + cross,
        VolFunctional::Lambda => {
            let sx = model.sigma.eval(x);
            base + sx * sx * cross
        }
    })
}
