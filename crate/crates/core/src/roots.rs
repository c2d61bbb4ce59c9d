//! Bracketed root-finding for monotone increasing maps.

use crate::error::{Error, Result};

pub const ROOT_TOL: f64 = 1e-12;
pub const MAX_ITER: usize = 200;
const MAX_EXPANSIONS: usize = 200;

/// Solves f(z) = target for increasing f. The bracket grows geometrically
/// from `start` with initial step `step`, then a secant/bisection hybrid
/// (Illinois variant) runs until |f(z) - target| <= tol or the bracket
/// collapses to adjacent floats.
pub fn solve_increasing<F>(f: F, target: f64, start: f64, step: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let g = |z: f64| -> Result<f64> {
        let v = f(z)?;
        if v.is_nan() {
            return Err(Error::NonFinite {
                what: "root-find map",
                at: z,
                value: v,
            });
        }
        Ok(v - target)
    };
    let g0 = g(start)?;
    if g0.abs() <= tol {
        return Ok(start);
    }
    let mut step = if step.is_finite() && step > 0.0 {
        step
    } else {
        1.0
    };
    let (mut lo, mut hi, mut glo, mut ghi);
    if g0 < 0.0 {
        lo = start;
        glo = g0;
        let mut n = 0;
        loop {
            let z = start + step;
            let gz = g(z)?;
            if gz >= 0.0 {
                hi = z;
                ghi = gz;
                break;
            }
            lo = z;
            glo = gz;
            step *= 2.0;
            n += 1;
            if n > MAX_EXPANSIONS || !z.is_finite() {
                return Err(Error::NoConvergence(format!("no bracket for target {target} above {start}")));
            }
        }
    } else {
        hi = start;
        ghi = g0;
        let mut n = 0;
        loop {
            let z = start - step;
            let gz = g(z)?;
            if gz <= 0.0 {
                lo = z;
                glo = gz;
                break;
            }
            hi = z;
            ghi = gz;
            step *= 2.0;
            n += 1;
            if n > MAX_EXPANSIONS || !z.is_finite() {
                return Err(Error::NoConvergence(format!("no bracket for target {target} below {start}")));
            }
        }
    }
    solve_bracketed(g, lo, hi, glo, ghi, tol)
}

/// Root of g inside [lo, hi] with g(lo) <= 0 <= g(hi).
pub(crate) fn solve_bracketed<G>(g: G, mut lo: f64, mut hi: f64, mut glo: f64, mut ghi: f64, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    let mut side = 0i8;
    for _ in 0..MAX_ITER {
        let width = hi - lo;
        let mut z = (lo * ghi - hi * glo) / (ghi - glo);
        if !(z > lo && z < hi) || !z.is_finite() {
            z = lo + 0.5 * width;
        }
        let gz = g(z)?;
        if gz.abs() <= tol {
            return Ok(z);
        }
        if gz < 0.0 {
            lo = z;
            glo = gz;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = z;
            ghi = gz;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
        // Guarantee progress when the secant stalls on one side.
        if hi - lo > 0.5 * width {
            let m = lo + 0.5 * (hi - lo);
            let gm = g(m)?;
            if gm.abs() <= tol {
                return Ok(m);
            }
            if gm < 0.0 {
                lo = m;
                glo = gm;
            } else {
                hi = m;
                ghi = gm;
            }
            side = 0;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return Ok(if glo.abs() < ghi.abs() { lo } else { hi });
        }
    }
    Err(Error::NoConvergence(format!(
        "bracket [{lo}, {hi}] not resolved in {MAX_ITER} iterations"
    )))
}

/// Root inside a known bracket for an increasing map.
pub fn solve_in<F>(f: F, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let g = |z: f64| -> Result<f64> { Ok(f(z)? - target) };
    let glo = g(lo)?;
    let ghi = g(hi)?;
    if glo > 0.0 || ghi < 0.0 {
        return Err(Error::NoConvergence(format!(
            "target {target} outside [{}, {}]",
            glo + target,
            ghi + target
        )));
    }
    solve_bracketed(g, lo, hi, glo, ghi, tol)
}
