//! Independent reference computations, written without the library's
//! quadrature or expansion code.

use super::{gauss_legendre, gl, norm_pdf, norm_sf, richardson};
use std::f64::consts::PI;

pub const ALPHA: f64 = 1.01;

fn h(r: f64) -> f64 {
    r.abs().powf(-1.0 - ALPHA)
}

/// ∫_a^∞ h(r) 1{|r| > eps} dr.
fn upper_tail(a: f64, eps: f64) -> f64 {
    let t = |u: f64| u.powf(-ALPHA) / ALPHA;
    if a > eps {
        t(a)
    } else if a >= -eps {
        t(eps)
    } else {
        2.0 * t(eps) - t(-a)
    }
}

fn c(x: f64) -> f64 {
    x.atan() / (2.0 * PI) + 0.75
}

fn c1(x: f64) -> f64 {
    1.0 / (2.0 * PI * (1.0 + x * x))
}

/// ∫_{-ε}^{ε} f(r) h(r) dr for f = O(r²) at 0: dyadic Gauss-Legendre shells
/// down to δ, plus the quadratic Taylor piece on (-δ, δ).
fn small_jump_integral(f: impl Fn(f64) -> f64, f2_at_0: f64, eps: f64) -> f64 {
    let rule = gauss_legendre(20);
    let delta = 1e-5;
    let mut s = 0.0;
    let mut hi = eps;
    while hi > delta {
        let lo = (0.5 * hi).max(delta);
        s += gl(|r| (f(r) + f(-r)) * h(r), lo, hi, 1, &rule);
        hi = lo;
    }
    // ∫_{-δ}^{δ} f''(0) r²/2 |r|^{-1-α} dr
    s + f2_at_0 * delta.powf(2.0 - ALPHA) / (2.0 - ALPHA)
}

/// ∫_a^∞ f(r) dr for f decaying like r^{-1-α}: r = a/s.
fn tail_integral(f: impl Fn(f64) -> f64, a: f64) -> f64 {
    let rule = gauss_legendre(20);
    let mut s = 0.0;
    let mut hi = 1.0;
    for _ in 0..60 {
        let lo = 0.5 * hi;
        s += gl(|u| f(a / u) * a / (u * u), lo, hi, 2, &rule);
        hi = lo;
    }
    s
}

/// D(0, y) for the arctan example model, corrected with the
/// σ²(x) ∂₁ν(x, y) cross term.
pub fn model_a_d(y: f64) -> f64 {
    let sig = 0.5 + 0.25 * y.sin();
    let dsig = 0.25 * y.cos();
    let hy = h(y);
    let dh = -(1.0 + ALPHA) * y.powf(-2.0 - ALPHA);
    -3.0 / 32.0 * dh + 0.75 * hy * (y.sin() - sig * dsig) - 0.375 * sig * sig * dh + hy / (8.0 * PI)
}

/// J(0, y) for the arctan example model with the second large jump drawn
/// from the post-jump state.
pub fn model_a_j(y: f64, eps: f64) -> f64 {
    let hy = h(y);
    let dh = -(1.0 + ALPHA) * y.powf(-2.0 - ALPHA);
    let big_h = y.powf(-ALPHA) / ALPHA;
    let c0 = 0.75;

    // c(r) H(y-r) - c(0) H(y) - r (c(0) h(y) + c'(0) H(y))
    let line1 = |r: f64| c(r) * upper_tail(y - r, eps) - c0 * big_h - r * (c0 * hy + c1(0.0) * big_h);
    // second derivative at 0: c''(0) H + 2 c'(0) h(y) - c(0) h'(y), c''(0) = 0
    let f2 = 2.0 * c1(0.0) * hy - c0 * dh;
    let j1 = 0.75 * small_jump_integral(line1, f2, eps);

    // ∫_{y-r}^{y} φ - φ(y) r with φ = c h
    let phi = |u: f64| c(u) * h(u);
    let rule = gauss_legendre(20);
    let line2 = |r: f64| gl(phi, y - r, y, 1, &rule) - phi(y) * r;
    let dphi = c1(y) * hy + c(y) * dh;
    let j2 = 0.75 * small_jump_integral(line2, -dphi, eps);

    // two large jumps
    let g = |r: f64| h(r) * c(r) * upper_tail(y - r, eps);
    let mut knots = vec![eps, y - eps, y + eps, 2.0 * y + 1.0];
    knots.retain(|&k| k >= eps);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut right = 0.0;
    for w in knots.windows(2) {
        right += graded(&g, w[0], w[1], &rule);
    }
    right += tail_integral(g, *knots.last().unwrap());
    let left = graded(&|r: f64| g(-r), eps, 2.0 * y + 1.0, &rule) + tail_integral(|r| g(-r), 2.0 * y + 1.0);
    let lambda = 2.0 * eps.powf(-ALPHA) / ALPHA;
    let hc_tail = tail_integral(|r| h(r) * c(r), y);
    let j3 = 0.75 * (right + left) - 0.75 * lambda * hc_tail - 0.5625 * lambda * big_h;
    j1 + j2 + j3
}

/// Panels refined geometrically towards both ends.
fn graded(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let m = 0.5 * (a + b);
    graded_left(f, a, m, rule) + graded_left(&|u| f(a + b - u), a, m, rule)
}

fn graded_left(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let mut s = 0.0;
    let mut lo = a;
    let mut w = (b - a) / 1024.0;
    while lo < b {
        let hi = (lo + w).min(b);
        s += gl(f, lo, hi, 1, rule);
        lo = hi;
        w *= 2.0;
    }
    s
}

/// ∫_{-∞}^{z} Φ(u) du = z Φ(z) + φ(z).
fn cdf_antiderivative(z: f64) -> f64 {
    z * (1.0 - norm_sf(z)) + norm_pdf(z)
}

/// P[S + σ W_t + b t ≥ y] where S is one jump uniform on ±[lo, hi].
fn one_jump_tail(u: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    // E over s of Φ̄((u - s)/sd); density 1/(2(hi-lo)) on each side
    let w = 1.0 / (2.0 * (hi - lo));
    if sd == 0.0 {
        let p = |a: f64, b: f64| (b - a.max(u)).clamp(0.0, b - a);
        return w * (p(lo, hi) + p(-hi, -lo));
    }
    // Φ̄((u - s)/sd) = Φ((s - u)/sd)
    let seg = |a: f64, b: f64| sd * (cdf_antiderivative((b - u) / sd) - cdf_antiderivative((a - u) / sd));
    w * (seg(lo, hi) + seg(-hi, -lo))
}

/// Exact tail of b t + σ W_t + compound Poisson (rate λ, marks uniform on
/// ±[lo, hi]), conditioning on at most three jumps.
pub fn compound_poisson_tail(t: f64, y: f64, b: f64, sigma: f64, rate: f64, lo: f64, hi: f64) -> f64 {
    let sd = sigma * t.sqrt();
    let u = y - b * t;
    let rule = gauss_legendre(20);
    let w = 1.0 / (2.0 * (hi - lo));
    let mark = |f: &dyn Fn(f64) -> f64| w * (gl(f, lo, hi, 4, &rule) + gl(f, -hi, -lo, 4, &rule));
    let p0 = if sd > 0.0 { norm_sf(u / sd) } else { (u <= 0.0) as u8 as f64 };
    let p1 = one_jump_tail(u, sd, lo, hi);
    let p2 = mark(&|s| one_jump_tail(u - s, sd, lo, hi));
    let p3 = mark(&|s1| mark(&|s2| one_jump_tail(u - s1 - s2, sd, lo, hi)));
    let lt = rate * t;
    let e = (-lt).exp();
    e * (p0 + lt * p1 + lt * lt / 2.0 * p2 + lt * lt * lt / 6.0 * p3)
}

/// (P1, P2) from Richardson extrapolation of f(t)/t and its slope.
pub fn short_time_coefficients(f: impl Fn(f64) -> f64, h0: f64, levels: usize) -> (f64, f64) {
    let hs: Vec<f64> = (0..levels).map(|k| h0 / 2f64.powi(k as i32)).collect();
    let g: Vec<f64> = hs.iter().map(|&h| f(h) / h).collect();
    let p1 = richardson(&g);
    let slopes: Vec<f64> = hs.iter().zip(&g).map(|(&h, &v)| 2.0 * (v - p1) / h).collect();
    (p1, richardson(&slopes))
}

/// A finite-activity model with state-dependent thinning: candidate marks
/// with density p (bumps at ±1.5, sd 0.4, total mass 1) accepted with
/// probability c(x) = 0.5 + 0.25 tanh x; b = 0, σ constant, γ = r.
pub struct Bumps {
    pub sigma: f64,
}

pub const BUMP_MU: f64 = 1.5;
pub const BUMP_SD: f64 = 0.4;

impl Bumps {
    pub fn c(x: f64) -> f64 {
        0.5 + 0.25 * x.tanh()
    }

    pub fn p(r: f64) -> f64 {
        0.5 * (norm_pdf((r - BUMP_MU) / BUMP_SD) + norm_pdf((r + BUMP_MU) / BUMP_SD)) / BUMP_SD
    }

    pub fn dp(r: f64) -> f64 {
        let s3 = BUMP_SD * BUMP_SD * BUMP_SD;
        -0.5 * ((r - BUMP_MU) * norm_pdf((r - BUMP_MU) / BUMP_SD) + (r + BUMP_MU) * norm_pdf((r + BUMP_MU) / BUMP_SD)) / s3
    }

    /// ∫ p(r) 1{r ≥ u} dr, with an independent N(0, v²) added to the mark.
    fn pbar(u: f64, v: f64) -> f64 {
        let sd = (BUMP_SD * BUMP_SD + v * v).sqrt();
        0.5 * (norm_sf((u - BUMP_MU) / sd) + norm_sf((u + BUMP_MU) / sd))
    }

    /// (P1, P2) at (x0, y) from the dominating-Poisson representation:
    /// P = Σ_n e^{-t} t^n/n! E_n(t), E_1 by quadrature over the candidate
    /// time and Brownian value, E_1'(0) by Richardson, E_2(0) in closed form
    /// up to one quadrature.
    pub fn coefficients(&self, x0: f64, y: f64) -> (f64, f64) {
        let sig = self.sigma;
        let c = Self::c;
        let rule = gauss_legendre(20);
        let e1 = |t: f64| {
            gl(
                |u| {
                    let tau = t * u;
                    let sz = sig * tau.sqrt();
                    let rest = sig * (t - tau).sqrt();
                    gl(
                        |z| {
                            let x = sz * z;
                            let miss = if rest > 0.0 { norm_sf((y - x) / rest) } else { (x >= y) as u8 as f64 };
                            norm_pdf(z) * (c(x0 + x) * Self::pbar(y - x, rest) + (1.0 - c(x0 + x)) * miss)
                        },
                        -9.0,
                        9.0,
                        12,
                        &rule,
                    )
                },
                0.0,
                1.0,
                4,
                &rule,
            )
        };
        let e10 = e1(0.0);
        let hs: Vec<f64> = (0..6).map(|k| 0.02 / 2f64.powi(k)).collect();
        let slopes: Vec<f64> = hs.iter().map(|&h| (e1(h) - e10) / h).collect();
        let e1p = richardson(&slopes);
        let c0 = c(x0);
        let smooth = gl(
            |r1| Self::p(r1) * (c0 * c(x0 + r1) * Self::pbar(y - r1, 0.0) + (1.0 - c0) * c0 * Self::pbar(y, 0.0)),
            -10.0,
            10.0,
            64,
            &rule,
        );
        // first accepted and reaching y, second rejected
        let kink = gl(|r1| Self::p(r1) * c0 * (1.0 - c(x0 + r1)), y, y + 10.0, 64, &rule);
        let e2 = smooth + kink;
        (e10, 2.0 * (e1p - e10 + 0.5 * e2))
    }
}
