//! The small-jump reparameterization ψ, ψ̄, δ and numerical checks of the
//! kernel identity it is built to satisfy.

use crate::error::{Error, Result};
use crate::model::{Dominating, ModelSpec};
use crate::quadrature::{try_integrate_range, Tol};
use crate::roots::solve_in;

const EQ_TOL: Tol = Tol::new(1e-15, 1e-13);
const INV_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ReparamContext {
    pub model: ModelSpec,
    pub eps: f64,
}

impl ReparamContext {
    pub fn new(model: ModelSpec, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        // ψ is only invertible when h charges every neighbourhood of 0.
        let probe = eps * 1e-6;
        if !(model.nu.h(probe) > 0.0 && model.nu.h(-probe) > 0.0) {
            return Err(Error::Domain(
                "the small-jump reparameterization needs h > 0 near 0 (finite-activity jumps have no small-jump part)".into(),
            ));
        }
        Ok(Self { model, eps })
    }

    fn check_small(&self, w: f64) -> Result<()> {
        if !(w.abs() < self.eps) || w == 0.0 {
            return Err(Error::Domain(format!("need 0 < |w| < eps = {}, got {w}", self.eps)));
        }
        Ok(())
    }

    /// -∫_w^ε f for w > 0, ∫_{-ε}^w f for w < 0.
    fn signed_mass(&self, f: impl Fn(f64) -> f64, w: f64) -> Result<f64> {
        let br = self.model.nu.breaks();
        if w > 0.0 {
            Ok(-try_integrate_range(|r| Ok(f(r)), w, self.eps, br, EQ_TOL)?.value)
        } else {
            Ok(try_integrate_range(|r| Ok(f(r)), -self.eps, w, br, EQ_TOL)?.value)
        }
    }

    /// Inverts a map increasing from -∞ to 0 on (0, ε) and from 0 to +∞ on
    /// (-ε, 0), halving towards 0 until the target is bracketed.
    fn invert(&self, map: impl Fn(f64) -> Result<f64>, v: f64) -> Result<f64> {
        let e = self.eps;
        if v == 0.0 {
            return Err(Error::Domain("the inverse is undefined at v = 0".into()));
        }
        let tol = INV_TOL * v.abs().max(1.0);
        if v < 0.0 {
            // w in (0, ε): map increases from -∞ to 0.
            let mut lo = 0.5 * e;
            let mut n = 0;
            while map(lo)? > v {
                lo *= 0.5;
                n += 1;
                if n > 1000 || lo == 0.0 {
                    return Err(Error::NoConvergence(format!("no bracket for ψ-inverse of {v}")));
                }
            }
            let hi = e * (1.0 - 1e-15);
            if map(hi)? < v {
                return Ok(hi);
            }
            solve_in(&map, v, lo, hi, tol)
        } else {
            // w in (-ε, 0)
            let mut hi = -0.5 * e;
            let mut n = 0;
            while map(hi)? < v {
                hi *= 0.5;
                n += 1;
                if n > 1000 || hi == 0.0 {
                    return Err(Error::NoConvergence(format!("no bracket for ψ-inverse of {v}")));
                }
            }
            let lo = -e * (1.0 - 1e-15);
            if map(lo)? > v {
                return Ok(lo);
            }
            solve_in(&map, v, lo, hi, tol)
        }
    }

    /// Dominating-density scale and index when h is a pure power law.
    fn power_law(&self) -> Option<(f64, f64)> {
        match (self.model.nu.kind(), self.model.nu.alpha()) {
            (Dominating::PowerLaw { scale }, Some(a)) => Some((scale, a)),
            _ => None,
        }
    }
}

/// ψ(w) = -∫_w^ε h for w > 0 and ∫_{-ε}^w h for w < 0.
pub fn psi(ctx: &ReparamContext, w: f64) -> Result<f64> {
    ctx.check_small(w)?;
    if let Some((s, a)) = ctx.power_law() {
        let d = s * (w.abs().powf(-a) - ctx.eps.powf(-a)) / a;
        return Ok(if w > 0.0 { -d } else { d });
    }
    let nu = &ctx.model.nu;
    ctx.signed_mass(|r| nu.h(r), w)
}

/// ψ⁻¹: closed form for power-law h, root-finding otherwise.
pub fn psi_inverse(ctx: &ReparamContext, v: f64) -> Result<f64> {
    if let Some((s, a)) = ctx.power_law() {
        let e = ctx.eps.powf(-a);
        return Ok(if v < 0.0 {
            (e - a * v / s).powf(-1.0 / a)
        } else if v > 0.0 {
            -(e + a * v / s).powf(-1.0 / a)
        } else {
            return Err(Error::Domain("the inverse is undefined at v = 0".into()));
        });
    }
    ctx.invert(|w| psi(ctx, w), v)
}

/// ψ̄(x, w): ψ with ν(x, ·) in place of h.
pub fn psi_bar(ctx: &ReparamContext, x: f64, w: f64) -> Result<f64> {
    ctx.check_small(w)?;
    let nu = &ctx.model.nu;
    ctx.signed_mass(|r| nu.nu(x, r), w)
}

pub fn psi_bar_inverse(ctx: &ReparamContext, x: f64, v: f64) -> Result<f64> {
    ctx.invert(|w| psi_bar(ctx, x, w), v)
}

/// δ(x, w) = γ(x, ψ̄⁻¹(x, ψ(w))), with δ(x, 0) = 0.
pub fn delta(ctx: &ReparamContext, x: f64, w: f64) -> Result<f64> {
    if w == 0.0 {
        return Ok(0.0);
    }
    let r = psi_bar_inverse(ctx, x, psi(ctx, w)?)?;
    Ok(ctx.model.gamma.eval(x, r))
}

/// δ⁻¹(x, w) = ψ⁻¹(ψ̄(x, γ⁻¹(x, w))).
pub fn delta_inverse(ctx: &ReparamContext, x: f64, w: f64) -> Result<f64> {
    if w == 0.0 {
        return Ok(0.0);
    }
    let r = ctx.model.gamma.inverse(x, w)?;
    psi_inverse(ctx, psi_bar(ctx, x, r)?)
}

/// Maps an endpoint r in [0, ε] (or [-ε, 0]) to the matching w.
fn transport(ctx: &ReparamContext, x: f64, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    if r.abs() >= ctx.eps {
        return Ok(r.signum() * ctx.eps);
    }
    psi_inverse(ctx, psi_bar(ctx, x, r)?)
}

/// |∫ 1_A(γ(x,r)) ν(x,r) 1{|r|<=ε} dr - ∫ 1_A(δ(x,w)) 1{|w|<=ε} h(w) dw|
/// for A = (a, b) on one side of 0.
pub fn kernel_equivalence_error(ctx: &ReparamContext, x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a < b) || (a < 0.0 && b > 0.0) || a == 0.0 && b == 0.0 {
        return Err(Error::Domain(format!("interval ({a}, {b}) must be ordered and not straddle 0")));
    }
    let e = ctx.eps;
    let g = &ctx.model.gamma;
    let nu = &ctx.model.nu;
    let (side_lo, side_hi) = if b <= 0.0 { (-e, 0.0) } else { (0.0, e) };
    let clip = |y: f64| -> Result<f64> {
        if y == 0.0 {
            return Ok(0.0);
        }
        Ok(g.inverse(x, y)?.clamp(side_lo, side_hi))
    };
    let (r_lo, r_hi) = (clip(a)?, clip(b)?);
    if r_lo == r_hi {
        return Ok(0.0);
    }
    let br = nu.breaks();
    let lhs = try_integrate_range(|r| Ok(nu.nu(x, r)), r_lo, r_hi, br, EQ_TOL)?.value;
    let (w_lo, w_hi) = (transport(ctx, x, r_lo)?, transport(ctx, x, r_hi)?);
    let rhs = try_integrate_range(|w| Ok(nu.h(w)), w_lo, w_hi, br, EQ_TOL)?.value;
    Ok((lhs - rhs).abs())
}

/// The default family: ten ε-fraction intervals on each side of 0.
pub fn default_interval_family(eps: f64) -> Vec<(f64, f64)> {
    const PAIRS: [(f64, f64); 10] = [
        (0.01, 0.03),
        (0.03, 0.1),
        (0.1, 0.3),
        (0.3, 0.6),
        (0.6, 0.9),
        (0.9, 1.5),
        (0.01, 0.3),
        (0.1, 0.9),
        (0.3, 1.5),
        (0.01, 0.9),
    ];
    let mut out: Vec<(f64, f64)> = PAIRS.iter().map(|&(a, b)| (a * eps, b * eps)).collect();
    out.extend(PAIRS.iter().map(|&(a, b)| (-b * eps, -a * eps)));
    out
}

/// Eleven points on [-5, 5].
pub fn default_equivalence_x_grid() -> Vec<f64> {
    (0..11).map(|i| -5.0 + i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub max_error: f64,
    pub worst_x: f64,
    pub worst_interval: (f64, f64),
    pub evaluated: usize,
}

pub fn kernel_sweep(ctx: &ReparamContext, x_grid: &[f64], intervals: &[(f64, f64)]) -> Result<KernelReport> {
    let mut rep = KernelReport {
        max_error: 0.0,
        worst_x: f64::NAN,
        worst_interval: (f64::NAN, f64::NAN),
        evaluated: 0,
    };
    for &x in x_grid {
        for &(a, b) in intervals {
            let e = kernel_equivalence_error(ctx, x, a, b)?;
            rep.evaluated += 1;
            if !(e <= rep.max_error) {
                rep.max_error = e;
                rep.worst_x = x;
                rep.worst_interval = (a, b);
            }
        }
    }
    Ok(rep)
}

/// Grid proxies for the regularity bounds on δ.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaBoundReport {
    /// max |∂₂δ|; finite means no blow-up was seen.
    pub sup_dw_delta: f64,
    /// Fitted k in |∂₁^i δ(x,w)| <= k |w| for i = 0, 1, 2.
    pub k_fit: [f64; 3],
    /// min |1 + ∂₁δ|.
    pub min_one_plus_dx: f64,
    /// max |ψ̄⁻¹(x, ψ(w))| / |w|; at most 1 when ν <= h.
    pub max_contraction: f64,
    pub eta: f64,
    pub contraction_ok: bool,
    pub nondegenerate_ok: bool,
}

impl DeltaBoundReport {
    pub fn passed(&self) -> bool {
        self.contraction_ok && self.nondegenerate_ok && self.sup_dw_delta.is_finite()
    }
}

/// Finite-difference estimates of ∂₂δ, ∂₁δ, ∂₁²δ over the grids.
pub fn delta_bound_check(ctx: &ReparamContext, x_grid: &[f64], w_grid: &[f64], eta: f64) -> Result<DeltaBoundReport> {
    let mut rep = DeltaBoundReport {
        sup_dw_delta: 0.0,
        k_fit: [0.0; 3],
        min_one_plus_dx: f64::INFINITY,
        max_contraction: 0.0,
        eta,
        contraction_ok: true,
        nondegenerate_ok: true,
    };
    for &x in x_grid {
        for &w in w_grid {
            ctx.check_small(w)?;
            let d = |x: f64, w: f64| delta(ctx, x, w);
            let hw = 1e-6 * w.abs();
            let hw = hw.min(0.5 * (ctx.eps - w.abs()));
            let dw = (d(x, w + hw)? - d(x, w - hw)?) / (2.0 * hw);
            let hx = 1e-3;
            let (dp, d0, dm) = (d(x + hx, w)?, d(x, w)?, d(x - hx, w)?);
            let dx = (dp - dm) / (2.0 * hx);
            let dxx = (dp - 2.0 * d0 + dm) / (hx * hx);
            let aw = w.abs();
            rep.sup_dw_delta = rep.sup_dw_delta.max(dw.abs());
            rep.k_fit[0] = rep.k_fit[0].max(d0.abs() / aw);
            rep.k_fit[1] = rep.k_fit[1].max(dx.abs() / aw);
            rep.k_fit[2] = rep.k_fit[2].max(dxx.abs() / aw);
            rep.min_one_plus_dx = rep.min_one_plus_dx.min((1.0 + dx).abs());
            let f = psi_bar_inverse(ctx, x, psi(ctx, w)?)?;
            let ratio = f.abs() / aw;
            rep.max_contraction = rep.max_contraction.max(ratio);
            if ratio > 1.0 + 1e-9 {
                rep.contraction_ok = false;
            }
        }
    }
    rep.nondegenerate_ok = rep.min_one_plus_dx > eta;
    if !rep.sup_dw_delta.is_finite() {
        rep.nondegenerate_ok = false;
    }
    Ok(rep)
}

/// A w-grid inside (-ε, ε)\{0}: ±ε·{0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.95}.
pub fn default_w_grid(eps: f64) -> Vec<f64> {
    let f = [0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.95];
    let mut out: Vec<f64> = f.iter().map(|v| -v * eps).collect();
    out.reverse();
    out.extend(f.iter().map(|v| v * eps));
    out
}
