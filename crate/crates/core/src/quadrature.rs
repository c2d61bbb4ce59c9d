//! Adaptive Gauss-Kronrod integration with helpers for Lévy-type integrands:
//! semi-infinite tails, punctured neighbourhoods of the origin and
//! iterated double integrals.

use crate::error::{Error, Result};

/// Accuracy request. The effective absolute target is
/// `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Tol {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    pub const fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            abs: self.abs * k,
            rel: self.rel * k,
        }
    }
}

impl From<f64> for Tol {
    fn from(abs: f64) -> Self {
        Tol::absolute(abs)
    }
}

/// Production accuracy for expansion coefficients.
pub const DEFAULT_TOL: Tol = Tol::new(1e-9, 1e-8);
/// Accuracy used by reference computations.
pub const FINE_TOL: Tol = Tol::new(1e-12, 1e-12);

const MAX_SEGMENTS: usize = 4000;
const STAGNATION_WINDOW: usize = 100;
const STALL_REL: f64 = 1e-6;
const MAX_SHELLS: usize = 1100;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl QuadratureResult {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn plus(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            abs_error_estimate: self.abs_error_estimate + other.abs_error_estimate,
            evaluations: self.evaluations + other.evaluations,
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self {
            value: self.value * k,
            abs_error_estimate: self.abs_error_estimate * k.abs(),
            evaluations: self.evaluations,
        }
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

/// Change of variables applied to a segment of the working axis.
#[derive(Debug, Clone, Copy)]
enum Map {
    Id,
    /// r = a + L s/(1-s), s in [0,1), L = max(1, |a|)
    Above(f64),
    /// r = b - L s/(1-s), s in [0,1), L = max(1, |b|)
    Below(f64),
}

impl Map {
    fn apply(&self, s: f64) -> (f64, f64) {
        match *self {
            Map::Id => (s, 1.0),
            Map::Above(a) => {
                let (d, l) = (1.0 - s, a.abs().max(1.0));
                (a + l * s / d, l / (d * d))
            }
            Map::Below(b) => {
                let (d, l) = (1.0 - s, b.abs().max(1.0));
                (b - l * s / d, l / (d * d))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    map: Map,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    floor: bool,
    stall: u8,
}

fn eval_mapped<F>(f: &F, map: Map, s: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (r, jac) = map.apply(s);
    if !r.is_finite() {
        return Ok(0.0);
    }
    let v = f(r)?;
    if !v.is_finite() {
        return Err(Error::NonFinite {
            what: "integrand",
            at: r,
            value: v,
        });
    }
    Ok(v * jac)
}

/// 21-point Kronrod rule on [a,b] with the QUADPACK error heuristic.
/// Returns (value, error, roundoff_limited).
fn kronrod21<F>(f: &F, map: Map, a: f64, b: f64) -> Result<(f64, f64, bool)>
where
    F: Fn(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();
    let fc = eval_mapped(f, map, center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..5 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = eval_mapped(f, map, center - dx)?;
        let f2 = eval_mapped(f, map, center + dx)?;
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += WG[j] * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = eval_mapped(f, map, center - dx)?;
        let f2 = eval_mapped(f, map, center + dx)?;
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_k += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * abs_half;
    let res_asc = res_asc * abs_half;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    let mut limited = false;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && floor >= err {
        err = floor;
        limited = true;
    }
    Ok((value, err, limited))
}

/// Globally adaptive bisection over a list of (mapped) segments sharing one
/// error budget.
fn adapt<F>(f: &F, pieces: &[(Map, f64, f64)], tol: Tol) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut segs: Vec<Segment> = Vec::with_capacity(64);
    let mut evaluations = 0usize;
    for &(map, a, b) in pieces {
        if a == b {
            continue;
        }
        let (value, error, floor) = kronrod21(f, map, a, b)?;
        evaluations += 21;
        segs.push(Segment {
            map,
            a,
            b,
            value,
            error,
            floor,
            stall: 0,
        });
    }
    let mut bisections = 0usize;
    let mut checkpoint = f64::INFINITY;
    loop {
        let total: f64 = segs.iter().map(|s| s.value).sum();
        let err: f64 = segs.iter().map(|s| s.error).sum();
        let target = tol.target(total);
        // A hundred bisections that fail to halve the error budget means
        // the integrand is noisy at this level; report what was reached.
        let stagnant = bisections > 0 && bisections % STAGNATION_WINDOW == 0 && {
            let stuck = err > 0.5 * checkpoint;
            checkpoint = err;
            stuck
        };
        if err <= target || stagnant {
            return Ok(QuadratureResult {
                value: total,
                abs_error_estimate: err,
                evaluations,
            });
        }
        // Worst segment that can still be improved.
        let worst = segs
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.floor)
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i);
        let Some(i) = worst else {
            // Every remaining segment is at the roundoff floor.
            return Ok(QuadratureResult {
                value: total,
                abs_error_estimate: err,
                evaluations,
            });
        };
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature {
                estimate: total,
                error: err,
                requested: target,
            });
        }
        let s = segs[i];
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a.min(s.b) || mid >= s.a.max(s.b) {
            segs[i].floor = true;
            continue;
        }
        bisections += 1;
        let (v1, e1, mut f1) = kronrod21(f, s.map, s.a, mid)?;
        let (v2, e2, mut f2) = kronrod21(f, s.map, mid, s.b)?;
        evaluations += 42;
        // Repeated bisections that neither reduce a small error nor move the
        // value beyond it mean the estimate is integrand noise. Large errors
        // that shrink slowly come from endpoint singularities and must keep
        // refining.
        let stalled = e1 + e2 >= 0.75 * s.error
            && s.error <= STALL_REL * (v1.abs() + v2.abs())
            && (v1 + v2 - s.value).abs() <= s.error.max(1e-5 * (v1 + v2).abs());
        let stall = if stalled { s.stall + 1 } else { 0 };
        if stall >= 3 {
            f1 = true;
            f2 = true;
        }
        segs[i] = Segment {
            map: s.map,
            a: s.a,
            b: mid,
            value: v1,
            error: e1,
            floor: f1,
            stall,
        };
        segs.push(Segment {
            map: s.map,
            a: mid,
            b: s.b,
            value: v2,
            error: e2,
            floor: f2,
            stall,
        });
    }
}

/// Integration domain on the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Oriented interval; `Interval(b, a)` integrates to minus `Interval(a, b)`.
    Interval(f64, f64),
    /// [a, inf)
    Above(f64),
    /// (-inf, b]
    Below(f64),
    /// {|r| > eps}; eps = 0 means the whole line minus the origin.
    Punctured(f64),
}

fn pieces_between(a: f64, b: f64, breaks: &[f64]) -> Vec<(Map, f64, f64)> {
    // a < b, either may be infinite
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&p| p.is_finite() && p > a && p < b)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut out = Vec::new();
    let mut nodes = Vec::with_capacity(pts.len() + 2);
    nodes.push(a);
    nodes.extend(pts);
    nodes.push(b);
    if nodes.len() == 2 && a == f64::NEG_INFINITY && b == f64::INFINITY {
        nodes.insert(1, 0.0);
    }
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => out.push((Map::Id, lo, hi)),
            (true, false) => out.push((Map::Above(lo), 0.0, 1.0)),
            (false, true) => out.push((Map::Below(hi), 0.0, 1.0)),
            (false, false) => unreachable!(),
        }
    }
    out
}

/// Oriented integral over [a, b] (endpoints may be infinite), split at the
/// given breakpoints.
pub fn try_integrate_range<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tol) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b || a.is_nan() || b.is_nan() {
        return Ok(QuadratureResult::zero());
    }
    if a > b {
        return try_integrate_range(f, b, a, breaks, tol).map(|r| r.scale(-1.0));
    }
    adapt(&f, &pieces_between(a, b, breaks), tol)
}

pub fn integrate_range<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tol) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    try_integrate_range(|r| Ok(f(r)), a, b, breaks, tol)
}

/// Adaptive integral over a finite interval.
pub fn integrate_interval<F>(f: F, a: f64, b: f64, tol: impl Into<Tol>) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    integrate_range(f, a, b, &[], tol.into())
}

/// Integral over [a, inf) through r = a + max(1,|a|) s/(1-s).
pub fn integrate_semi_infinite<F>(f: F, a: f64, tol: impl Into<Tol>) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    integrate_range(f, a, f64::INFINITY, &[], tol.into())
}

/// Integral of f over (0, upper] accumulated over dyadic shells
/// [upper 2^{-k-1}, upper 2^{-k}]. Requires upper > 0.
pub fn try_integrate_shells<F>(f: F, upper: f64, tol: Tol) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<f64>,
{
    let shell_tol = Tol::new(tol.abs / 64.0, tol.rel);
    let mut acc = QuadratureResult::zero();
    let mut prev = 0.0f64;
    let mut growth = 0usize;
    let mut hi = upper;
    for k in 0..MAX_SHELLS {
        let lo = 0.5 * hi;
        let shell = adapt(&f, &[(Map::Id, lo, hi)], shell_tol)?;
        acc = acc.plus(shell);
        let s = shell.value.abs();
        if k > 0 && s > prev {
            growth += 1;
            if growth >= 8 {
                return Err(Error::Divergence { partial: acc.value });
            }
        } else {
            growth = 0;
        }
        let target = tol.target(acc.value) / 10.0;
        if k >= 3 && (s > 0.0 || k >= 64) && s <= target {
            let q = if prev > 0.0 { s / prev } else { 0.0 };
            if q < 1.0 && s * q / (1.0 - q) <= target {
                return Ok(acc);
            }
        }
        prev = s;
        hi = lo;
        if hi < 1e-300 {
            break;
        }
    }
    Err(Error::Quadrature {
        estimate: acc.value,
        error: acc.abs_error_estimate,
        requested: tol.target(acc.value),
    })
}

/// Integral over {|r| > eps}. For eps = 0 the neighbourhood |r| <= 1 is
/// covered by dyadic shells towards the origin.
pub fn try_integrate_punctured<F>(f: F, eps: f64, breaks: &[f64], tol: Tol) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if eps < 0.0 {
        return Err(Error::Domain(format!("negative puncture radius {eps}")));
    }
    let cut = eps.max(1.0);
    let mut pieces = pieces_between(cut, f64::INFINITY, breaks);
    pieces.extend(pieces_between(f64::NEG_INFINITY, -cut, breaks));
    if eps > 0.0 && eps < 1.0 {
        pieces.extend(pieces_between(eps, 1.0, breaks));
        pieces.extend(pieces_between(-1.0, -eps, breaks));
    }
    if eps > 0.0 {
        return adapt(&f, &pieces, tol);
    }
    let outer = adapt(&f, &pieces, tol.scaled(0.5))?;
    let right = try_integrate_shells(&f, 1.0, tol.scaled(0.25))?;
    let left = try_integrate_shells(|r| f(-r), 1.0, tol.scaled(0.25))?;
    Ok(outer.plus(right).plus(left))
}

pub fn integrate_punctured<F>(f: F, eps: f64, tol: impl Into<Tol>) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    try_integrate_punctured(|r| Ok(f(r)), eps, &[], tol.into())
}

/// Integral over {0 < |r| <= radius}, by dyadic shells on both sides.
pub fn try_integrate_small<F>(f: F, radius: f64, tol: Tol) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if radius <= 0.0 {
        return Ok(QuadratureResult::zero());
    }
    let right = try_integrate_shells(&f, radius, tol.scaled(0.5))?;
    let left = try_integrate_shells(|r| f(-r), radius, tol.scaled(0.5))?;
    Ok(right.plus(left))
}

pub fn try_integrate<F>(f: F, domain: Domain, breaks: &[f64], tol: Tol) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<f64>,
{
    match domain {
        Domain::Interval(a, b) => try_integrate_range(f, a, b, breaks, tol),
        Domain::Above(a) => try_integrate_range(f, a, f64::INFINITY, breaks, tol),
        Domain::Below(b) => try_integrate_range(f, f64::NEG_INFINITY, b, breaks, tol),
        Domain::Punctured(eps) => try_integrate_punctured(f, eps, breaks, tol),
    }
}

/// Iterated integral of f(outer, inner) over outer in `outer` and inner in
/// `inner(outer)`. Inner integrals run at a tenth of the outer tolerance.
pub fn integrate_double<F, D>(f: F, outer: Domain, inner: D, tol: impl Into<Tol>) -> Result<QuadratureResult>
where
    F: Fn(f64, f64) -> f64,
    D: Fn(f64) -> Domain,
{
    let tol = tol.into();
    let inner_tol = tol.scaled(0.1);
    let inner_err = std::cell::Cell::new(0.0f64);
    let inner_evals = std::cell::Cell::new(0usize);
    let res = try_integrate(
        |r| {
            let q = try_integrate(|s| Ok(f(r, s)), inner(r), &[], inner_tol)?;
            inner_err.set(inner_err.get().max(q.abs_error_estimate));
            inner_evals.set(inner_evals.get() + q.evaluations);
            Ok(q.value)
        },
        outer,
        &[],
        tol,
    )?;
    Ok(QuadratureResult {
        value: res.value,
        abs_error_estimate: res.abs_error_estimate + inner_err.get(),
        evaluations: res.evaluations + inner_evals.get(),
    })
}

/// Fixed 21-point Kronrod rule on [a, b]; for short smooth ranges.
pub fn kronrod_fixed<F>(f: F, a: f64, b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    Ok(kronrod21(&f, Map::Id, a, b)?.0)
}
