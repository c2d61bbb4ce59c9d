//! Monte Carlo for the finite-activity approximation: small jumps replaced
//! by extra diffusion, big jumps thinned from the dominating process, and
//! Euler–Maruyama on the jump-augmented grid.

use dashmap::DashMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Dominating, ModelSpec, TruncationConfig, INNER_TOL};
use crate::quadrature::{kronrod_fixed, try_integrate_punctured, try_integrate_range, try_integrate_shells};
use crate::roots::solve_bracketed;
use crate::sharemeasure::gamma_slope_bound;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub eps: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub horizon_t: f64,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            eps: 0.01,
            n_steps: 100,
            n_paths: 100_000,
            horizon_t: 0.1,
            seed: 0,
            antithetic: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("sim eps must be positive, got {}", self.eps)));
        }
        if self.n_steps == 0 || self.n_paths == 0 {
            return Err(Error::Config("n_steps and n_paths must be at least 1".into()));
        }
        if !(self.horizon_t >= 0.0 && self.horizon_t.is_finite()) {
            return Err(Error::Config(format!("horizon must be non-negative, got {}", self.horizon_t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
    pub n_paths: usize,
    pub seed: u64,
}

impl TailEstimate {
    pub fn from_hits(hits: usize, n_paths: usize, seed: u64) -> Self {
        let p = hits as f64 / n_paths as f64;
        let se = (p * (1.0 - p) / n_paths as f64).sqrt();
        Self {
            p_hat: p,
            std_err: se,
            ci95: (p - 1.96 * se, p + 1.96 * se),
            n_paths,
            seed,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci95.1 - self.ci95.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionEstimate {
    pub price: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
    /// Sample mean of e^{X_t}; 1 for a martingale model.
    pub mean_exp: f64,
    pub mean_exp_std_err: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Summary of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub terminal: f64,
    /// Candidate jumps that cleared the |γ| > ε test.
    pub candidates: u32,
    pub accepted: u32,
    /// Sum over those candidates of ν̄(X_{τ-}, J).
    pub acceptance_prob_sum: f64,
}

/// Compensated (Neumaier) sum in iteration order.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Arrival times of a Poisson process with rate `lambda` on (0, t].
pub fn sample_jump_times<R: Rng + ?Sized>(rng: &mut R, lambda: f64, t: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(lambda > 0.0) || !(t > 0.0) {
        return out;
    }
    let exp = Exp::new(lambda).expect("positive rate");
    let mut s = 0.0;
    loop {
        s += exp.sample(rng);
        if s > t {
            return out;
        }
        out.push(s);
    }
}

const TABLE_RATIO: f64 = 1.05;
const TABLE_MAX_CELLS: usize = 4000;
const INVERSION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
struct TailTable {
    /// Nodes r_k = cutoff ρ^k.
    nodes: Vec<f64>,
    /// tail[k] = ∫_{r_k}^∞ h(±r) dr.
    tail: Vec<f64>,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    PowerLaw { alpha: f64 },
    Table { pos: TailTable, neg: TailTable },
    Empty,
}

/// Draws from ȟ(r) = h(r) 1{|r| > cutoff} / λ by inverse transform.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    cutoff: f64,
    lambda: f64,
    kind: SamplerKind,
    h: crate::model::JumpIntensity,
}

impl JumpSampler {
    pub fn new(model: &ModelSpec, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::Config(format!("jump cutoff must be positive, got {cutoff}")));
        }
        let nu = model.nu.clone();
        if let (Dominating::PowerLaw { scale }, Some(alpha)) = (nu.kind(), nu.alpha()) {
            let lambda = 2.0 * scale * cutoff.powf(-alpha) / alpha;
            return Ok(Self {
                cutoff,
                lambda,
                kind: SamplerKind::PowerLaw { alpha },
                h: nu,
            });
        }
        let pos = Self::table(&nu, cutoff, 1.0)?;
        let neg = Self::table(&nu, cutoff, -1.0)?;
        let lambda = pos.tail[0] + neg.tail[0];
        let kind = if lambda > 0.0 { SamplerKind::Table { pos, neg } } else { SamplerKind::Empty };
        Ok(Self { cutoff, lambda, kind, h: nu })
    }

    fn table(nu: &crate::model::JumpIntensity, cutoff: f64, sign: f64) -> Result<TailTable> {
        let breaks: Vec<f64> = nu.breaks().iter().map(|b| b * sign).collect();
        let hs = |r: f64| Ok(nu.h(sign * r));
        let fail = |e: Error| Error::Config(format!("cannot tabulate the jump-size law: {e}"));
        // Breaks become nodes so every cell is smooth for the inversion rule.
        let mut ahead: Vec<f64> = breaks.iter().copied().filter(|&b| b > cutoff).collect();
        ahead.sort_by(f64::total_cmp);
        let mut nodes = vec![cutoff];
        let mut cells = Vec::new();
        let mut r = cutoff;
        for _ in 0..TABLE_MAX_CELLS {
            let mut next = r * TABLE_RATIO;
            if let Some(&b) = ahead.iter().find(|&&b| b > r) {
                next = next.min(b);
            }
            let m = try_integrate_range(hs, r, next, &breaks, INNER_TOL).map_err(fail)?.value;
            cells.push(m);
            nodes.push(next);
            r = next;
            let rest = try_integrate_range(hs, r, f64::INFINITY, &breaks, INNER_TOL).map_err(fail)?.value;
            let total: f64 = cells.iter().sum::<f64>() + rest;
            if rest <= 1e-16 * total || rest == 0.0 {
                // Remaining mass is negligible; absorbed into the last cell.
                *cells.last_mut().unwrap() += rest;
                let mut tail = vec![0.0; nodes.len()];
                for k in (0..cells.len()).rev() {
                    tail[k] = tail[k + 1] + cells[k];
                }
                return Ok(TailTable { nodes, tail });
            }
        }
        Err(Error::Config("jump-size tail table did not terminate; is h integrable?".into()))
    }

    /// λ = ∫ h 1{|r| > cutoff}.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Inverse transform: `v` in (0, 1] selects the magnitude through the
    /// tail function, `side` in [0, 1) the sign (positive below the
    /// positive-side share of λ).
    pub fn from_uniforms(&self, v: f64, side: f64) -> Result<f64> {
        match &self.kind {
            SamplerKind::PowerLaw { alpha } => {
                let mag = self.cutoff * v.powf(-1.0 / alpha);
                Ok(if side < 0.5 { mag } else { -mag })
            }
            SamplerKind::Table { pos, neg } => {
                let share = pos.tail[0] / self.lambda;
                if side < share {
                    self.invert(pos, v * pos.tail[0], 1.0)
                } else {
                    Ok(-self.invert(neg, v * neg.tail[0], -1.0)?)
                }
            }
            SamplerKind::Empty => Err(Error::Domain("no jump mass above the cutoff".into())),
        }
    }

    /// Solves ∫_r^∞ h(±s) ds = m.
    fn invert(&self, table: &TailTable, m: f64, sign: f64) -> Result<f64> {
        let tail = &table.tail;
        // Last node whose tail mass is >= m.
        let k = tail.partition_point(|&t| t >= m).saturating_sub(1).min(tail.len() - 2);
        let (a, b) = (table.nodes[k], table.nodes[k + 1]);
        let need = tail[k] - m;
        let cell = tail[k] - tail[k + 1];
        if cell <= 0.0 {
            return Ok(a);
        }
        let h = |r: f64| self.h.h(sign * r);
        let g = |r: f64| -> Result<f64> { Ok(kronrod_fixed(|s| Ok(h(s)), a, r)? - need) };
        // Newton from the linear guess, kept inside the bracket.
        let mut lo = a;
        let mut hi = b;
        let mut r = a + (b - a) * (need / cell).clamp(0.0, 1.0);
        for _ in 0..30 {
            let gv = g(r)?;
            if gv.abs() <= INVERSION_TOL * cell.max(1e-300) {
                return Ok(r);
            }
            if gv < 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            let d = h(r);
            let mut next = if d > 0.0 { r - gv / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(next);
            }
            r = next;
        }
        let (glo, ghi) = (g(lo)?, g(hi)?);
        solve_bracketed(g, lo, hi, glo.min(0.0), ghi.max(0.0), INVERSION_TOL * cell)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let v = 1.0 - rng.random::<f64>();
        let side = rng.random::<f64>();
        self.from_uniforms(v, side)
    }
}

/// One draw from ȟ_ε. Builds the sampler on every call; use
/// [`JumpSampler`] for repeated draws.
pub fn sample_jump_size<R: Rng + ?Sized>(rng: &mut R, model: &ModelSpec, trunc: &TruncationConfig) -> Result<f64> {
    JumpSampler::new(model, trunc.eps)?.sample(rng)
}

/// Drift correction ∫ γ [1{|r|<=1} - 1{|γ|<=ε}] ν dr.
fn drift_correction(model: &ModelSpec, eps: f64, x: f64) -> Result<f64> {
    let g = &model.gamma;
    let a = g.inverse(x, -eps)?;
    let b = g.inverse(x, eps)?;
    let f = |r: f64| Ok(g.eval(x, r) * model.nu.nu(x, r));
    let br = model.nu.breaks();
    let right = try_integrate_range(f, b, 1.0, br, INNER_TOL)?.value;
    let left = try_integrate_range(f, -1.0, a, br, INNER_TOL)?.value;
    Ok(right + left)
}

fn small_jump_variance(model: &ModelSpec, eps: f64, x: f64) -> Result<f64> {
    let g = &model.gamma;
    let hi = g.inverse(x, eps)?;
    let lo = g.inverse(x, -eps)?;
    let f = |r: f64| {
        let v = g.eval(x, r);
        Ok(v * v * model.nu.nu(x, r))
    };
    let right = try_integrate_shells(f, hi, INNER_TOL)?.value;
    let left = try_integrate_shells(|r| f(-r), -lo, INNER_TOL)?.value;
    Ok(right + left)
}

const CORE_HALF: i64 = 100;

/// b̃_ε and σ̂²_ε on a uniform x-grid, interpolated by Catmull–Rom cubics.
/// Nodes outside the precomputed core are filled on first use; every
/// node value depends only on its index.
struct CoefficientGrid<'a> {
    model: &'a ModelSpec,
    eps: f64,
    center: f64,
    step: f64,
    core: Vec<(f64, f64)>,
    extra: DashMap<i64, (f64, f64)>,
}

impl<'a> CoefficientGrid<'a> {
    fn new(model: &'a ModelSpec, eps: f64, center: f64, t: f64) -> Result<Self> {
        let s2 = small_jump_variance(model, eps, center)?;
        let sig = model.sigma.eval(center);
        let sd = (t * (sig * sig + s2)).sqrt().max(1e-2);
        let step = 12.0 * sd / (2 * CORE_HALF) as f64;
        let mut grid = Self {
            model,
            eps,
            center,
            step,
            core: Vec::new(),
            extra: DashMap::new(),
        };
        let core: Result<Vec<(f64, f64)>> = (-CORE_HALF..=CORE_HALF).into_par_iter().map(|i| grid.compute(i)).collect();
        grid.core = core?;
        Ok(grid)
    }

    fn compute(&self, i: i64) -> Result<(f64, f64)> {
        let x = self.center + i as f64 * self.step;
        let drift = self.model.b.eval(x) - drift_correction(self.model, self.eps, x)?;
        let var = small_jump_variance(self.model, self.eps, x)?;
        if !drift.is_finite() || !var.is_finite() {
            return Err(Error::NonFinite {
                what: "simulation coefficient",
                at: x,
                value: if drift.is_finite() { var } else { drift },
            });
        }
        Ok((drift, var))
    }

    fn node(&self, i: i64) -> Result<(f64, f64)> {
        if (-CORE_HALF..=CORE_HALF).contains(&i) {
            return Ok(self.core[(i + CORE_HALF) as usize]);
        }
        if let Some(v) = self.extra.get(&i) {
            return Ok(*v);
        }
        let v = self.compute(i)?;
        self.extra.insert(i, v);
        Ok(v)
    }

    /// (b̃_ε(x), σ̂²_ε(x)).
    fn at(&self, x: f64) -> Result<(f64, f64)> {
        let u = (x - self.center) / self.step;
        let i = u.floor();
        let s = u - i;
        let i = i as i64;
        let p: [(f64, f64); 4] = [self.node(i - 1)?, self.node(i)?, self.node(i + 1)?, self.node(i + 2)?];
        let cr = |a: f64, b: f64, c: f64, d: f64| {
            b + 0.5 * s * (c - a + s * (2.0 * a - 5.0 * b + 4.0 * c - d + s * (3.0 * (b - c) + d - a)))
        };
        let drift = cr(p[0].0, p[1].0, p[2].0, p[3].0);
        let var = cr(p[0].1, p[1].1, p[2].1, p[3].1).max(0.0);
        Ok((drift, var))
    }
}

/// Reusable simulation state for one (model, config, start point).
pub struct Simulator<'a> {
    model: &'a ModelSpec,
    cfg: SimConfig,
    x0: f64,
    sampler: JumpSampler,
    coeffs: CoefficientGrid<'a>,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a ModelSpec, cfg: SimConfig, x0: f64) -> Result<Self> {
        cfg.validate()?;
        // |γ(x,r)| <= c|r|, so marks below ε/c can never produce a big jump.
        let c = gamma_slope_bound(&model.gamma).max(1.0);
        let sampler = JumpSampler::new(model, cfg.eps / c)?;
        let coeffs = CoefficientGrid::new(model, cfg.eps, x0, cfg.horizon_t)?;
        Ok(Self {
            model,
            cfg,
            x0,
            sampler,
            coeffs,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn sampler(&self) -> &JumpSampler {
        &self.sampler
    }

    /// Stream for path `i`: antithetic pairs share one stream.
    fn rng_for(&self, i: usize) -> (ChaCha8Rng, bool) {
        let (stream, flip) = if self.cfg.antithetic { (i / 2, i % 2 == 1) } else { (i, false) };
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stream as u64);
        (rng, flip)
    }

    /// Simulates one path with the given generator. Normals are negated
    /// when `flip` is set.
    pub fn simulate_with<R: Rng + ?Sized>(&self, rng: &mut R, flip: bool) -> Result<PathOutcome> {
        let t = self.cfg.horizon_t;
        let mut x = self.x0;
        let mut out = PathOutcome {
            terminal: x,
            candidates: 0,
            accepted: 0,
            acceptance_prob_sum: 0.0,
        };
        if t == 0.0 {
            return Ok(out);
        }
        let times = sample_jump_times(rng, self.sampler.lambda(), t);
        let mut marks = Vec::with_capacity(times.len());
        for _ in &times {
            let j = self.sampler.sample(rng)?;
            let u: f64 = rng.random();
            marks.push((j, u));
        }
        let n = self.cfg.n_steps;
        let dt_grid = t / n as f64;
        let mut now = 0.0;
        let mut next_jump = 0;
        let mut j = 1;
        let sign = if flip { -1.0 } else { 1.0 };
        let (m, eps) = (self.model, self.cfg.eps);
        while j <= n || next_jump < times.len() {
            let grid_t = if j <= n { if j == n { t } else { j as f64 * dt_grid } } else { f64::INFINITY };
            let jump_t = times.get(next_jump).copied().unwrap_or(f64::INFINITY);
            let target = grid_t.min(jump_t);
            let dt = target - now;
            if dt > 0.0 {
                let (drift, var) = self.coeffs.at(x)?;
                let s = m.sigma.eval(x);
                let z: f64 = StandardNormal.sample(rng);
                x += drift * dt + (s * s + var).sqrt() * dt.sqrt() * sign * z;
            }
            now = target;
            if jump_t <= grid_t {
                let (r, u) = marks[next_jump];
                let g = m.gamma.eval(x, r);
                if g.abs() > eps {
                    let p = m.nu.nu(x, r) / m.nu.h(r);
                    out.candidates += 1;
                    out.acceptance_prob_sum += p;
                    if u < p {
                        out.accepted += 1;
                        x += g;
                    }
                }
                next_jump += 1;
            }
            if grid_t <= jump_t {
                j += 1;
            }
        }
        if !x.is_finite() {
            return Err(Error::NonFinite {
                what: "simulated path",
                at: now,
                value: x,
            });
        }
        out.terminal = x;
        Ok(out)
    }

    /// Path `i` of the configured experiment.
    pub fn path(&self, i: usize) -> Result<PathOutcome> {
        let (mut rng, flip) = self.rng_for(i);
        self.simulate_with(&mut rng, flip)
    }

    /// All paths, in index order. Independent of the thread count.
    pub fn run(&self) -> Result<Vec<PathOutcome>> {
        (0..self.cfg.n_paths).into_par_iter().map(|i| self.path(i)).collect()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
}

/// Terminal value X̃_t of path 0 of the configuration started at x0.
pub fn simulate_path<R: Rng + ?Sized>(model: &ModelSpec, cfg: &SimConfig, rng: &mut R, x0: f64) -> Result<f64> {
    Ok(Simulator::new(model, *cfg, x0)?.simulate_with(rng, false)?.terminal)
}

/// Fraction of paths with X̃_t >= x0 + y for each y.
pub fn tail_from_outcomes(outcomes: &[PathOutcome], x0: f64, y: f64, seed: u64) -> TailEstimate {
    let hits = outcomes.iter().filter(|o| o.terminal >= x0 + y).count();
    TailEstimate::from_hits(hits, outcomes.len(), seed)
}

pub fn estimate_tail(model: &ModelSpec, cfg: &SimConfig, x: f64, y: f64) -> Result<TailEstimate> {
    let sim = Simulator::new(model, *cfg, x)?;
    let out = sim.run()?;
    Ok(tail_from_outcomes(&out, x, y, cfg.seed))
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = neumaier_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Call price estimate from simulated log-returns started at 0.
pub fn option_from_outcomes(outcomes: &[PathOutcome], s0: f64, k: f64, seed: u64) -> OptionEstimate {
    let ek = k.exp();
    let pay: Vec<f64> = outcomes.iter().map(|o| s0 * (o.terminal.exp() - ek).max(0.0)).collect();
    let growth: Vec<f64> = outcomes.iter().map(|o| o.terminal.exp()).collect();
    let (price, se) = mean_and_se(&pay);
    let (me, me_se) = mean_and_se(&growth);
    OptionEstimate {
        price,
        std_err: se,
        ci95: (price - 1.96 * se, price + 1.96 * se),
        mean_exp: me,
        mean_exp_std_err: me_se,
        n_paths: outcomes.len(),
        seed,
    }
}

/// E(s0 e^{X̃_t} - s0 e^k)_+ with X̃_0 = 0.
pub fn estimate_option(model: &ModelSpec, cfg: &SimConfig, s0: f64, k: f64) -> Result<OptionEstimate> {
    let sim = Simulator::new(model, *cfg, 0.0)?;
    let out = sim.run()?;
    Ok(option_from_outcomes(&out, s0, k, cfg.seed))
}

/// λ for the candidate cutoff used by the simulator.
pub fn candidate_rate(model: &ModelSpec, eps: f64) -> Result<f64> {
    let c = gamma_slope_bound(&model.gamma).max(1.0);
    Ok(try_integrate_punctured(|r| Ok(model.nu.h(r)), eps / c, model.nu.breaks(), INNER_TOL)?.value)
}
