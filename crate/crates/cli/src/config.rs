use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use osearch::actuator::ActuatorConfig;
use osearch::control::RewardConfig;
use osearch::search::UpdateMode;
use serde::{Deserialize, Serialize};

pub const RUN_SCHEMA: &str = "osearch.run/1";

/// Configuration of `osearch search`, read from JSON or TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub library: Option<PathBuf>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub actuator: ActuatorConfig,
    pub search: SearchSpec,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub metrics: MetricSpec,
    /// Replaces model, library and actuator with a closed-form objective.
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub mode: ModeSpec,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_multiplier")]
    pub bounds_multiplier: f64,
}

fn default_k() -> usize {
    5
}

fn default_multiplier() -> f64 {
    2.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeSpec {
    /// Levels are multiples of each axis scale.
    Grid { levels: Vec<Vec<f64>> },
    Random { n_requests: usize },
    Bo {
        budget: usize,
        update: UpdateMode,
        #[serde(default)]
        grow_library: bool,
        #[serde(default = "default_pool")]
        warm_pool: usize,
        #[serde(default = "default_warm")]
        warm_size: usize,
        #[serde(default)]
        max_queries: Option<usize>,
        #[serde(default = "default_ei_starts")]
        ei_starts: usize,
        #[serde(default = "default_ei_evals")]
        ei_evals: usize,
    },
}

fn default_pool() -> usize {
    128
}

fn default_warm() -> usize {
    64
}

fn default_ei_starts() -> usize {
    64
}

fn default_ei_evals() -> usize {
    200
}

impl ModeSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModeSpec::Grid { .. } => "grid",
            ModeSpec::Random { .. } => "random",
            ModeSpec::Bo { .. } => "bo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub eps: Vec<f64>,
    pub best_of: Vec<usize>,
    pub calibration_bins: usize,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec {
            eps: default_eps_grid(),
            best_of: vec![1, 5],
            calibration_bins: 10,
        }
    }
}

/// 0.01 to 0.50 in steps of 0.01.
pub fn default_eps_grid() -> Vec<f64> {
    (1..=50).map(|i| i as f64 / 100.0).collect()
}

/// Gaussian bump `exp(-|z - center|^2 / (2 width^2))` realised with
/// Gaussian error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub center: Vec<f64>,
    pub width: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub invalid_rate: f64,
}

impl SyntheticSpec {
    pub fn objective(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |z: &[f64]| {
            let d2: f64 = z.iter().zip(&self.center).map(|(a, b)| (a - b).powi(2)).sum();
            (-d2 / (2.0 * self.width * self.width)).exp()
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != RUN_SCHEMA {
            bail!("unsupported config schema `{}` (expected `{RUN_SCHEMA}`)", self.schema);
        }
        if self.seeds.is_empty() {
            bail!("config lists no seeds");
        }
        if self.search.k == 0 {
            bail!("search.k must be at least 1");
        }
        if !(self.search.bounds_multiplier > 0.0) {
            bail!("search.bounds_multiplier must be positive");
        }
        self.actuator.validate()?;
        match &self.synthetic {
            Some(s) => {
                if !(s.width > 0.0) || !(0.0..=1.0).contains(&s.invalid_rate) || !(s.noise_sigma >= 0.0) {
                    bail!("synthetic objective needs width > 0, noise_sigma >= 0 and invalid_rate in [0, 1]");
                }
            }
            None => {
                if self.model.is_none() || self.library.is_none() {
                    bail!("config needs `model` and `library` unless `synthetic` is set");
                }
            }
        }
        if let ModeSpec::Grid { levels } = &self.search.mode {
            if levels.iter().any(Vec::is_empty) {
                bail!("every grid axis needs at least one level");
            }
        }
        Ok(())
    }
}
