//! Single-instance recovery.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_csv;
use crate::error::Result;
use crate::exec::Execution;
use crate::generator::{sample_gaussian_network, VarianceMode};
use crate::optimizer::{sample_truth, two_arm, Arm, OptimizerConfig, RecoveryResult};
use crate::rng::derive_seed;
use crate::spiked::{control_parameter, noise_for_control, ModelKind, NoiseModel, SpikedInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverConfig {
    pub model: ModelKind,
    pub k: usize,
    pub n1: usize,
    pub n: usize,
    pub d: usize,
    pub variance_mode: VarianceMode,
    /// Control parameter; translated into `N` or `ν`.
    pub theta: f64,
    pub sigma: f64,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub execution: Execution,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Wigner,
            k: 10,
            n1: 250,
            n: 1700,
            d: 2,
            variance_mode: VarianceMode::Experiment,
            theta: 0.1,
            sigma: 1.0,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverReport {
    pub config: RecoverConfig,
    pub dims: Vec<usize>,
    pub noise: NoiseModel,
    pub realized_theta: f64,
    pub x_star: Vec<f64>,
    pub result: RecoveryResult,
}

#[derive(Serialize)]
struct TraceRow {
    arm: Arm,
    iteration: usize,
    loss: f64,
    grad_norm: f64,
}

pub fn run_recover(cfg: &RecoverConfig) -> Result<RecoverReport> {
    let dims = super::config::layer_dims(cfg.k, cfg.n1, cfg.n, cfg.d)?;
    let noise = noise_for_control(cfg.model, &dims, cfg.theta, cfg.sigma)?;
    let net = sample_gaussian_network(
        dims.as_slice(),
        cfg.variance_mode,
        derive_seed(cfg.seed, &[1]),
    )?;
    let truth = sample_truth(&net, derive_seed(cfg.seed, &[2]))?;
    let x_star = truth.x_star.to_vec();
    let inst = SpikedInstance::sample(truth, noise, derive_seed(cfg.seed, &[3]), cfg.execution)?;
    let opt = OptimizerConfig {
        seed: derive_seed(cfg.seed, &[4]),
        ..cfg.optimizer.clone()
    };
    let result = two_arm(&net, &inst, &opt, cfg.execution)?;
    Ok(RecoverReport {
        config: cfg.clone(),
        dims: dims.as_slice().to_vec(),
        noise,
        realized_theta: control_parameter(&dims, &noise)?,
        x_star,
        result,
    })
}

/// Writes `recover.json` and `trace.csv` (per-iteration loss and gradient norm of both arms).
pub fn write_recover(report: &RecoverReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("recover.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    let rows: Vec<TraceRow> = [
        (Arm::Plus, &report.result.plus),
        (Arm::Minus, &report.result.minus),
    ]
    .into_iter()
    .flat_map(|(arm, trace)| {
        trace.losses.iter().zip(&trace.grad_norms).enumerate().map(
            move |(iteration, (&loss, &grad_norm))| TraceRow {
                arm,
                iteration,
                loss,
                grad_norm,
            },
        )
    })
    .collect();
    write_csv(&dir.join("trace.csv"), None, &rows)?;
    Ok(())
}
