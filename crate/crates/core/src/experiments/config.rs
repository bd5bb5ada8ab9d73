use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::measures::CantorParams;
use crate::quad::QuadratureConfig;
use crate::{Error, Result};

use super::EXPERIMENTS;

/// Output directory when neither the command line, `NHSQ_OUT` nor the
/// config file name one.
pub const DEFAULT_OUT_DIR: &str = "nhsq-out";

/// Flat, typed run configuration. Every field has a default, so a config
/// file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Cantor exponent `m`.
    pub m: f64,
    /// Cantor mass-splitting constant `C`.
    pub c: f64,
    /// Generations `0..=generations` in the norm series.
    pub generations: usize,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,

    pub t_steps_per_band: usize,
    pub y_resolution_depth: usize,
    pub rel_tol: f64,
    pub trunc_generation: usize,

    /// Generations checked against direct enumeration.
    pub oracle_generations: usize,
    /// First generation of the vertical domination fit.
    pub fit_start: usize,
    /// Leaf level of the L² and weak-(1,1) inputs.
    pub leaf_level: usize,
    pub random_inputs: usize,
    pub kernel_samples: usize,
    pub growth_samples: usize,
    /// Truncations of the demo log-product function.
    pub demo_truncations: Vec<usize>,
    pub paper_truncation: usize,
    pub dyadic_samples: usize,
    /// Depth of the dyadic cubes in the testing functional.
    pub testing_depth: u32,
    pub spikes: usize,
    pub pi_trials: usize,
    pub goodness_cutoff: u32,
    pub shift_trials: usize,
    pub forest_depth: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            m: 0.4,
            c: 16.0,
            generations: 40,
            alphas: vec![1.0, 1.5, 2.0],
            seed: 20_240_601,
            out: None,
            t_steps_per_band: 16,
            y_resolution_depth: 10,
            rel_tol: 1e-3,
            trunc_generation: 40,
            oracle_generations: 3,
            fit_start: 1,
            leaf_level: 5,
            random_inputs: 20,
            kernel_samples: 10_000,
            growth_samples: 100_000,
            demo_truncations: vec![2, 3, 4],
            paper_truncation: 4,
            dyadic_samples: 1000,
            testing_depth: 12,
            spikes: 10,
            pi_trials: 4000,
            goodness_cutoff: 24,
            shift_trials: 100,
            forest_depth: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(name: &str) -> Self {
        Self { experiment: name.to_string(), ..Self::default() }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn cantor_params(&self, depth: usize) -> CantorParams {
        CantorParams::new(self.m, self.c, depth)
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            t_steps_per_band: self.t_steps_per_band,
            y_resolution_depth: self.y_resolution_depth,
            rel_tol: self.rel_tol,
            trunc_generation: self.trunc_generation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENTS.iter().any(|e| e.name == self.experiment) {
            return Err(Error::UnknownExperiment(self.experiment.clone()));
        }
        self.cantor_params(1).validate()?;
        self.quadrature().validate()?;
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a >= 1.0 && a.is_finite())) {
            return Err(Error::Config(format!("apertures {:?} must be non-empty and at least 1", self.alphas)));
        }
        if self.generations == 0 {
            return Err(Error::Config("generations must be positive".into()));
        }
        if self.demo_truncations.is_empty() {
            return Err(Error::Config("demo_truncations is empty".into()));
        }
        if self.pi_trials < 100 {
            return Err(Error::Config(format!("pi_trials = {} below 100", self.pi_trials)));
        }
        Ok(())
    }
}

/// Output directory: command line, then `NHSQ_OUT`, then the config file,
/// then [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(cli: Option<&Path>, env: Option<&str>, config: &ExperimentConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(e) = env.filter(|e| !e.is_empty()) {
        return PathBuf::from(e);
    }
    config.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}
