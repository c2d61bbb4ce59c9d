//! The four commands. Each returns the rendered document plus whether
//! every check passed; I/O is left to the caller.

use jumptail::equivalence::{
    default_equivalence_x_grid, default_interval_family, default_w_grid, delta_bound_check, kernel_sweep, ReparamContext,
};
use jumptail::expansion::{tail_expansion, ExpansionResult};
use jumptail::model::{default_r_grid, default_x_grid, validate_assumptions, ModelSpec, TruncationConfig};
use jumptail::montecarlo::{option_from_outcomes, tail_from_outcomes, OptionEstimate, PathOutcome, SimConfig, Simulator};
use jumptail::sharemeasure::{check_moment_condition, leading_term_direct, martingale_gate, otm_price_expansion, OptionExpansion};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::csv::{real, Table};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Compare,
    Price,
    Equivalence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub body: String,
    pub format: Format,
    pub passed: bool,
    /// Per-row failures recorded under keep-going.
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed && self.warnings.is_empty() {
            0
        } else {
            1
        }
    }
}

pub const COMPARE_COLUMNS: [&str; 13] = [
    "t", "y", "eps", "p1_term", "p2_term", "order1", "order2", "mc_est", "mc_se", "mc_ci_lo", "mc_ci_hi", "n_paths", "seed",
];

pub const PRICE_COLUMNS: [&str; 8] = ["k", "t", "first_term", "second_term", "total", "leading_direct", "mc_price", "mc_se"];

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    match cmd {
        Command::Validate => validate(cfg, &model),
        Command::Compare => compare(cfg, &model),
        Command::Price => price(cfg, &model),
        Command::Equivalence => equivalence(cfg, &model),
    }
}

fn json_outcome(doc: Value, passed: bool) -> Outcome {
    Outcome {
        body: serde_json::to_string_pretty(&doc).expect("report serializes") + "\n",
        format: Format::Json,
        passed,
        warnings: Vec::new(),
    }
}

fn validate(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<Outcome, CliError> {
    let rep = validate_assumptions(model, &default_x_grid(), &default_r_grid(), cfg.eta)?;
    let checks: Vec<Value> = rep
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "passed": c.passed,
                "worst": c.worst,
                "witness": c.witness.map(|(x, r)| json!([x, r])),
            })
        })
        .collect();
    let mut passed = rep.all_passed();
    let moment = if cfg.check_s5 || !cfg.k_grid.is_empty() {
        match check_moment_condition(&model.gamma, &model.nu) {
            Ok(c) => json!({ "checked": true, "passed": true, "c": c }),
            Err(e) => {
                passed = false;
                json!({ "checked": true, "passed": false, "error": e.to_string() })
            }
        }
    } else {
        json!({ "checked": false })
    };
    let doc = json!({
        "command": "validate",
        "model": model.label,
        "eta": rep.eta,
        "checks": checks,
        "moment_condition": moment,
        "passed": passed,
    });
    Ok(json_outcome(doc, passed))
}

fn sim_config(cfg: &ExperimentConfig, eps: f64, t: f64) -> SimConfig {
    SimConfig {
        eps,
        n_steps: cfg.sim.n_steps,
        n_paths: cfg.sim.n_paths,
        horizon_t: t,
        seed: cfg.sim.seed,
        antithetic: cfg.sim.antithetic,
    }
}

fn simulate(model: &ModelSpec, cfg: &ExperimentConfig, eps: f64, t: f64, x0: f64) -> jumptail::Result<Vec<PathOutcome>> {
    Simulator::new(model, sim_config(cfg, eps, t), x0)?.run()
}

/// Collects per-item results; under keep-going failures become warnings
/// and `None`, otherwise the first failure in grid order aborts.
fn settle<T>(items: Vec<jumptail::Result<T>>, what: impl Fn(usize) -> String, keep_going: bool, warnings: &mut Vec<String>) -> Result<Vec<Option<T>>, CliError> {
    let mut out = Vec::with_capacity(items.len());
    for (i, r) in items.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(Some(v)),
            Err(e) if keep_going => {
                warnings.push(format!("{}: {e}", what(i)));
                out.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn compare(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<Outcome, CliError> {
    cfg.require("t_grid")?;
    cfg.require("y_grid")?;
    let x0 = cfg.x0;
    let mut warnings = Vec::new();

    let ye: Vec<(f64, f64)> = cfg.y_grid.iter().flat_map(|&y| cfg.eps_list.iter().map(move |&e| (y, e))).collect();
    let expansions: Vec<jumptail::Result<ExpansionResult>> = ye
        .par_iter()
        .map(|&(y, eps)| tail_expansion(model, &TruncationConfig::new(eps)?, x0, y, 0.0))
        .collect();
    let expansions = settle(expansions, |i| format!("expansion at y = {}, eps = {}", ye[i].0, ye[i].1), cfg.keep_going, &mut warnings)?;

    // One simulation per (eps, t) serves every y.
    let et: Vec<(f64, f64)> = cfg.eps_list.iter().flat_map(|&e| cfg.t_grid.iter().map(move |&t| (e, t))).collect();
    let mut sims = Vec::with_capacity(et.len());
    for &(eps, t) in &et {
        sims.push(simulate(model, cfg, eps, t, x0));
    }
    let sims = settle(sims, |i| format!("simulation at eps = {}, t = {}", et[i].0, et[i].1), cfg.keep_going, &mut warnings)?;

    let mut table = Table::new(&COMPARE_COLUMNS);
    let ne = cfg.eps_list.len();
    let nt = cfg.t_grid.len();
    for (ti, &t) in cfg.t_grid.iter().enumerate() {
        for (yi, &y) in cfg.y_grid.iter().enumerate() {
            for (ei, &eps) in cfg.eps_list.iter().enumerate() {
                let mut row = vec![real(t), real(y), real(eps)];
                match &expansions[yi * ne + ei] {
                    Some(e) => {
                        let (o1, o2) = (e.order1_at(t), e.order2_at(t));
                        row.extend([real(o1), real(o2 - o1), real(o1), real(o2)]);
                    }
                    None => row.extend(std::iter::repeat_n(real(f64::NAN), 4)),
                }
                match &sims[ei * nt + ti] {
                    Some(out) => {
                        let est = tail_from_outcomes(out, x0, y, cfg.sim.seed);
                        row.extend([real(est.p_hat), real(est.std_err), real(est.ci95.0), real(est.ci95.1)]);
                    }
                    None => row.extend(std::iter::repeat_n(real(f64::NAN), 4)),
                }
                row.push(cfg.sim.n_paths.to_string());
                row.push(cfg.sim.seed.to_string());
                table.push(row);
            }
        }
    }
    Ok(Outcome {
        body: table.render(),
        format: Format::Csv,
        passed: true,
        warnings,
    })
}

/// The expansion at maturity t from one evaluated at any maturity.
fn at_maturity(e: &OptionExpansion, t: f64) -> (f64, f64) {
    let ek = e.k.exp();
    let first = t * e.s0 * (e.p1_sharp - ek * e.p1_plain);
    let second = 0.5 * t * t * e.s0 * (e.p2_sharp - ek * e.p2_plain);
    (first, second)
}

fn price(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<Outcome, CliError> {
    cfg.require("t_grid")?;
    cfg.require("k_grid")?;
    // Gates run before any row is produced.
    check_moment_condition(&model.gamma, &model.nu)?;
    martingale_gate(model)?;
    let eps = cfg.eps_list[0];
    let trunc = TruncationConfig::new(eps)?;
    let s0 = cfg.s0;
    let t_ref = cfg.t_grid[0];
    let mut warnings = Vec::new();

    let expansions: Vec<jumptail::Result<OptionExpansion>> =
        cfg.k_grid.par_iter().map(|&k| otm_price_expansion(model, s0, k, t_ref, &trunc)).collect();
    let expansions = settle(expansions, |i| format!("expansion at k = {}", cfg.k_grid[i]), cfg.keep_going, &mut warnings)?;

    let kt: Vec<(f64, f64)> = cfg.k_grid.iter().flat_map(|&k| cfg.t_grid.iter().map(move |&t| (k, t))).collect();
    let direct: Vec<jumptail::Result<f64>> = kt.par_iter().map(|&(k, t)| leading_term_direct(model, s0, k, t)).collect();
    let direct = settle(direct, |i| format!("leading term at k = {}, t = {}", kt[i].0, kt[i].1), cfg.keep_going, &mut warnings)?;

    let mc: Vec<Option<Vec<PathOutcome>>> = if cfg.sim.price_mc {
        let mut sims = Vec::with_capacity(cfg.t_grid.len());
        for &t in &cfg.t_grid {
            sims.push(simulate(model, cfg, eps, t, 0.0));
        }
        settle(sims, |i| format!("simulation at t = {}", cfg.t_grid[i]), cfg.keep_going, &mut warnings)?
    } else {
        vec![None; cfg.t_grid.len()]
    };

    let mut table = Table::new(&PRICE_COLUMNS);
    let nt = cfg.t_grid.len();
    for (ki, &k) in cfg.k_grid.iter().enumerate() {
        for (ti, &t) in cfg.t_grid.iter().enumerate() {
            let mut row = vec![real(k), real(t)];
            match &expansions[ki] {
                Some(e) => {
                    let (first, second) = at_maturity(e, t);
                    row.extend([real(first), real(second), real(first + second)]);
                }
                None => row.extend(std::iter::repeat_n(real(f64::NAN), 3)),
            }
            row.push(real(direct[ki * nt + ti].unwrap_or(f64::NAN)));
            match &mc[ti] {
                Some(out) => {
                    let OptionEstimate { price, std_err, .. } = option_from_outcomes(out, s0, k, cfg.sim.seed);
                    row.extend([real(price), real(std_err)]);
                }
                // MC disabled or failed: empty fields.
                None => row.extend([String::new(), String::new()]),
            }
            table.push(row);
        }
    }
    Ok(Outcome {
        body: table.render(),
        format: Format::Csv,
        passed: true,
        warnings,
    })
}

fn equivalence(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<Outcome, CliError> {
    let xs = default_equivalence_x_grid();
    let mut runs = Vec::new();
    let mut passed = true;
    for &eps in &cfg.eps_list {
        let ctx = ReparamContext::new(model.clone(), eps)?;
        let fam = default_interval_family(eps);
        let k = kernel_sweep(&ctx, &xs, &fam)?;
        let d = delta_bound_check(&ctx, &xs, &default_w_grid(eps), cfg.eta)?;
        let ok = k.max_error <= cfg.threshold && d.passed();
        passed &= ok;
        runs.push(json!({
            "eps": eps,
            "kernel": {
                "max_error": k.max_error,
                "worst_x": k.worst_x,
                "worst_interval": [k.worst_interval.0, k.worst_interval.1],
                "evaluated": k.evaluated,
                "threshold": cfg.threshold,
                "passed": k.max_error <= cfg.threshold,
            },
            "delta_bounds": {
                "sup_dw_delta": d.sup_dw_delta,
                "k_fit": d.k_fit,
                "min_one_plus_dx": d.min_one_plus_dx,
                "max_contraction": d.max_contraction,
                "eta": d.eta,
                "contraction_ok": d.contraction_ok,
                "nondegenerate_ok": d.nondegenerate_ok,
                "passed": d.passed(),
            },
            "passed": ok,
        }));
    }
    let doc = json!({
        "command": "equivalence",
        "model": model.label,
        "runs": runs,
        "passed": passed,
    });
    Ok(json_outcome(doc, passed))
}
