//! Experiment plumbing: data ingestion, splitting, synthetic data,
//! configuration, multi-seed runs and their artifacts.

mod experiment;
mod io;
mod split;
mod synthetic;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::density::QuadratureGrid;
use crate::error::{Error, Result};
use crate::fw::FwConfig;
use crate::models::{synthetic_bimodal_target, BimodalTarget, ModelKind};

pub use experiment::{
    density_table, read_run_dir, run_experiment, write_density_csv, DensityTable, MeanStd, RunDir, RunSummary,
    SeedResult,
};
pub use io::{load_csv, write_csv, Schema};
pub use split::split;
pub use synthetic::{synthetic_logistic, synthetic_matrix, MatrixSpec};

/// Parameters of the two-component 1-D target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BimodalParams {
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    pub pi: [f64; 2],
}

impl Default for BimodalParams {
    fn default() -> Self {
        let t = BimodalTarget::default();
        Self {
            mu: t.mu,
            sigma: t.sigma,
            pi: t.pi,
        }
    }
}

impl BimodalParams {
    pub fn target(&self) -> Result<BimodalTarget> {
        synthetic_bimodal_target(self.mu, self.sigma, self.pi)
            .map_err(|e| Error::invalid("bimodal", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub bimodal: BimodalParams,
    /// Latent dimension of the factorization model.
    pub latent_dim: usize,
    /// CSV file to use instead of the built-in synthetic data.
    pub data: Option<PathBuf>,
    /// Fraction of observations used for training.
    pub split: f64,
    /// Seeds `seed, seed + 1, ...` are run; `fw.seed` is replaced by each.
    pub seed: u64,
    pub n_seeds: usize,
    /// Seed of the synthetic data, shared by all runs.
    pub data_seed: u64,
    /// Posterior draws for the held-out metrics.
    pub predictive_samples: usize,
    pub fw: FwConfig,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Bimodal,
            bimodal: BimodalParams::default(),
            latent_dim: 2,
            data: None,
            split: 0.7,
            seed: 0,
            n_seeds: 1,
            data_seed: 0,
            predictive_samples: 1000,
            fw: FwConfig::default(),
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::invalid("split", format!("must lie in (0, 1), got {}", self.split)));
        }
        if self.n_seeds < 1 {
            return Err(Error::invalid("n_seeds", "must be at least 1"));
        }
        if self.latent_dim < 1 {
            return Err(Error::invalid("latent_dim", "must be at least 1"));
        }
        if self.predictive_samples < 1 {
            return Err(Error::invalid("predictive_samples", "must be at least 1"));
        }
        if self.model == ModelKind::Bimodal {
            if self.data.is_some() {
                return Err(Error::invalid("data", "the bimodal model takes no data file"));
            }
            self.bimodal.target()?;
        }
        self.fw.validate()
    }

    /// The run's seeds, in order.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }

    /// Config with defaults filled in the way the run uses them: the KL
    /// grid of 1-D targets and the run seed in the loop settings.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        cfg.fw.seed = cfg.seed;
        if cfg.model == ModelKind::Bimodal && cfg.fw.kl_grid.is_none() {
            cfg.fw.kl_grid = Some(QuadratureGrid::new(-10.0, 10.0, 2001).expect("valid grid"));
        }
        cfg
    }
}
