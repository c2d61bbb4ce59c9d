#![allow(dead_code)]

pub mod oracles;

use statrs::distribution::{ContinuousCDF, Normal};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
    }
    (x, w)
}

/// Composite Gauss–Legendre over [a, b] with `pieces` equal panels.
pub fn gl(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let h = (b - a) / pieces as f64;
    let mut s = 0.0;
    for p in 0..pieces {
        let lo = a + p as f64 * h;
        let c = lo + 0.5 * h;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            s += w * f(c + 0.5 * h * x);
        }
    }
    0.5 * h * s
}

/// Graded panels towards 0 on (0, b]: [b 2^{-k-1}, b 2^{-k}] for k < levels.
pub fn gl_graded(f: impl Fn(f64) -> f64, b: f64, levels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let mut s = 0.0;
    let mut hi = b;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        s += gl(&f, lo, hi, 1, rule);
        hi = lo;
    }
    s
}

pub fn norm_sf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sf(z)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Richardson table for g(h) = g0 + a1 h + a2 h² + ..., from values at
/// h, h/2, h/4, ...; returns the extrapolated g0.
pub fn richardson(values: &[f64]) -> f64 {
    let mut t = values.to_vec();
    let n = t.len();
    for k in 1..n {
        let f = (2.0f64).powi(k as i32);
        for i in (k..n).rev() {
            t[i] = (f * t[i] - t[i - 1]) / (f - 1.0);
        }
    }
    t[n - 1]
}
