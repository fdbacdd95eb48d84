use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::generator::{LayerDims, VarianceMode};
use crate::optimizer::OptimizerConfig;
use crate::spiked::ModelKind;

/// Settings of the error-versus-noise scaling study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub k_list: Vec<usize>,
    pub n1: usize,
    pub n: usize,
    pub d: usize,
    pub variance_mode: VarianceMode,
    /// Control-parameter grid.
    pub theta_list: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Wishart noise level `σ`.
    pub sigma: f64,
    pub optimizer: OptimizerConfig,
    pub output_dir: PathBuf,
    /// Thread count for trials; 0 uses all cores.
    pub workers: usize,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Wishart,
            k_list: vec![10, 30],
            n1: 250,
            n: 1700,
            d: 2,
            variance_mode: VarianceMode::Experiment,
            theta_list: vec![0.1, 0.2, 0.4],
            trials: 20,
            base_seed: 0,
            sigma: 1.0,
            optimizer: OptimizerConfig::default(),
            output_dir: PathBuf::from("out"),
            workers: 0,
            execution: Execution::Parallel,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.k_list.is_empty() || self.theta_list.is_empty() {
            return Err(invalid("k_list and theta_list must be nonempty"));
        }
        for &t in &self.theta_list {
            let ok = match self.model {
                ModelKind::Wishart => t > 0.0 && t.is_finite(),
                ModelKind::Wigner => t >= 0.0 && t.is_finite(),
            };
            if !ok {
                return Err(invalid(format!(
                    "control parameter {t} is not allowed for {:?}",
                    self.model
                )));
            }
        }
        if self.d == 0 {
            return Err(invalid("d must be at least 1"));
        }
        for &k in &self.k_list {
            self.layer_dims(k)?;
        }
        self.optimizer.validate()
    }

    /// `[k, n1, …, n]`; for `d > 2` the hidden widths interpolate
    /// geometrically between `n1` and `n`.
    pub fn layer_dims(&self, k: usize) -> Result<LayerDims> {
        layer_dims(k, self.n1, self.n, self.d)
    }
}

pub fn layer_dims(k: usize, n1: usize, n: usize, d: usize) -> Result<LayerDims> {
    let dims = match d {
        0 => return Err(invalid("d must be at least 1")),
        1 => vec![k, n],
        _ => {
            let mut dims = vec![k, n1];
            let ratio = (n as f64 / n1 as f64).powf(1.0 / (d - 1) as f64);
            for i in 1..d - 1 {
                dims.push((n1 as f64 * ratio.powi(i as i32)).round() as usize);
            }
            dims.push(n);
            dims
        }
    };
    LayerDims::new(dims)
}
