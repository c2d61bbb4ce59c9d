//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use jumptail::model::ModelSpec;
use jumptail::models::{self, DriftSpec, SigmaSpec};
use serde::Deserialize;

use crate::error::CliError;

/// A built-in label ("modelA", "modelB") or a parametric family.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Label(String),
    Family(Family),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// ν(x,r) = c(x) e^{-λ|r|} |r|^{-1-α}, γ = r.
    ArctanStable {
        alpha: f64,
        #[serde(default)]
        tempering: f64,
        drift: DriftConfig,
        sigma: SigmaConfig,
        #[serde(default)]
        label: Option<String>,
    },
    /// State-free: ν(x,r) = h(r) = scale e^{-λ|r|} |r|^{-1-α}.
    TemperedStable {
        alpha: f64,
        #[serde(default)]
        tempering: f64,
        #[serde(default = "one")]
        scale: f64,
        drift: DriftConfig,
        sigma: SigmaConfig,
        #[serde(default)]
        label: Option<String>,
    },
    CompoundPoisson {
        rate: f64,
        lo: f64,
        hi: f64,
        b: f64,
        sigma: f64,
        #[serde(default)]
        label: Option<String>,
    },
    Diffusion {
        b: f64,
        sigma: f64,
        #[serde(default)]
        label: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Sine { amplitude: f64 },
    Constant { value: f64 },
    Martingale,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaConfig {
    pub level: f64,
    #[serde(default)]
    pub sine: f64,
}

impl DriftConfig {
    fn spec(self) -> DriftSpec {
        match self {
            DriftConfig::Sine { amplitude } => DriftSpec::Sine { amplitude },
            DriftConfig::Constant { value } => DriftSpec::Constant(value),
            DriftConfig::Martingale => DriftSpec::Martingale,
        }
    }
}

impl SigmaConfig {
    fn spec(self) -> SigmaSpec {
        SigmaSpec { level: self.level, sine: self.sine }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Run the Monte Carlo columns of `price`.
    pub price_mc: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            n_steps: 100,
            n_paths: 100_000,
            seed: 0,
            antithetic: false,
            price_mc: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub y_grid: Vec<f64>,
    #[serde(default)]
    pub k_grid: Vec<f64>,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "one")]
    pub s0: f64,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub outputs: Outputs,
    /// Largest kernel error `equivalence` accepts.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Non-degeneracy margin for |1 + ∂₁γ| and |1 + ∂₁δ|.
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub check_s5: bool,
    #[serde(default)]
    pub keep_going: bool,
}

fn default_eps_list() -> Vec<f64> {
    vec![0.01]
}

fn one() -> f64 {
    1.0
}

fn default_threshold() -> f64 {
    1e-7
}

fn default_eta() -> f64 {
    1e-6
}

/// Command-line values that replace top-level fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub keep_going: bool,
    pub check_s5: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        // serde_json's message already names the line and column
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sim.seed = seed;
        }
        if let Some(eps) = o.eps {
            self.eps_list = vec![eps];
        }
        self.keep_going |= o.keep_going;
        self.check_s5 |= o.check_s5;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: &str| Err(CliError::Config(format!("{field}: {why}")));
        if self.eps_list.is_empty() {
            return bad("eps_list", "must not be empty");
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("eps_list", "entries must be positive");
        }
        if self.t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return bad("t_grid", "entries must be non-negative");
        }
        if self.y_grid.iter().any(|y| !(*y > 0.0 && y.is_finite())) {
            return bad("y_grid", "entries must be positive");
        }
        if self.k_grid.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return bad("k_grid", "entries must be positive");
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return bad("s0", "must be positive");
        }
        if !self.x0.is_finite() {
            return bad("x0", "must be finite");
        }
        if self.sim.n_steps == 0 || self.sim.n_paths == 0 {
            return bad("sim", "n_steps and n_paths must be at least 1");
        }
        if !(self.threshold >= 0.0) {
            return bad("threshold", "must be non-negative");
        }
        if !(self.eta > 0.0) {
            return bad("eta", "must be positive");
        }
        Ok(())
    }

    /// Grids a command needs, checked for presence.
    pub fn require(&self, field: &str) -> Result<(), CliError> {
        let empty = match field {
            "t_grid" => self.t_grid.is_empty(),
            "y_grid" => self.y_grid.is_empty(),
            "k_grid" => self.k_grid.is_empty(),
            _ => false,
        };
        if empty {
            return Err(CliError::Config(format!("{field}: must not be empty for this command")));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<ModelSpec, CliError> {
        let cfg_err = |e: jumptail::Error| CliError::Config(format!("model: {e}"));
        match &self.model {
            ModelConfig::Label(l) => models::by_label(l)
                .ok_or_else(|| CliError::Config(format!("model: unknown label {l:?} (expected \"modelA\" or \"modelB\")"))),
            ModelConfig::Family(Family::ArctanStable { alpha, tempering, drift, sigma, label }) => {
                let label = label.as_deref().unwrap_or("arctan_stable");
                models::arctan_stable(*alpha, *tempering, drift.spec(), sigma.spec(), label).map_err(cfg_err)
            }
            ModelConfig::Family(Family::TemperedStable { alpha, tempering, scale, drift, sigma, label }) => {
                let label = label.as_deref().unwrap_or("tempered_stable");
                models::tempered_stable(*alpha, *tempering, *scale, drift.spec(), sigma.spec(), label).map_err(cfg_err)
            }
            ModelConfig::Family(Family::CompoundPoisson { rate, lo, hi, b, sigma, label }) => {
                let label = label.as_deref().unwrap_or("compound_poisson");
                models::compound_poisson(*rate, *lo, *hi, *b, *sigma, label).map_err(cfg_err)
            }
            ModelConfig::Family(Family::Diffusion { b, sigma, label }) => {
                Ok(models::diffusion(*b, *sigma, label.as_deref().unwrap_or("diffusion")))
            }
        }
    }
}
