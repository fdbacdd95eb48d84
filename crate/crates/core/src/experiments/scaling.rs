//! Reconstruction error against the noise control parameter.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::stats::{fit_through_origin, mean, spread_ratio, std_error, OriginFit};
use super::svg::{line_plot, Series};
use super::write_csv;
use crate::error::Result;
use crate::exec::Execution;
use crate::generator::sample_gaussian_network;
use crate::optimizer::{sample_truth, two_arm, Arm, OptimizerConfig, StopReason};
use crate::rng::{derive_seed, stable_hash};
use crate::spiked::{control_parameter, noise_for_control, ModelKind, NoiseModel, SpikedInstance};

pub const RAW_HEADER: &str = "# spiked-gen scaling v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub model: ModelKind,
    pub k: usize,
    pub theta: f64,
    /// Wishart sample count `N`.
    #[serde(rename = "N")]
    pub samples: Option<usize>,
    /// Wigner noise level `ν`.
    pub nu: Option<f64>,
    /// Control parameter recomputed from `N` or `ν`.
    pub realized_theta: f64,
    pub trial: usize,
    pub seed: u64,
    /// `‖G(x̂) − y⋆‖`, with `‖y⋆‖ = 1`.
    pub recon_error: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub chosen_arm: Arm,
    pub stop_reason: StopReason,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggRow {
    pub k: usize,
    pub theta: f64,
    pub mean_err: f64,
    pub stderr: f64,
    pub n_trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub k: usize,
    #[serde(flatten)]
    pub fit: OriginFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub theta: f64,
    /// Largest over smallest mean error across the k-curves.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub fits: Vec<CurveFit>,
    pub min_r_squared: f64,
    pub overlap: Vec<Overlap>,
    pub max_overlap_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingOutput {
    pub config: ExperimentConfig,
    pub rows: Vec<ScalingRow>,
    pub aggregate: Vec<AggRow>,
    pub summary: ScalingSummary,
}

/// Seed of one trial; depends only on `(k, θ, trial)` and the base seed, so
/// extending the grid leaves existing trials untouched.
pub fn trial_seed(base_seed: u64, k: usize, theta: f64, trial: usize) -> u64 {
    base_seed ^ stable_hash(&[k as u64, theta.to_bits(), trial as u64])
}

pub fn run_trial(cfg: &ExperimentConfig, k: usize, theta: f64, trial: usize) -> Result<ScalingRow> {
    let seed = trial_seed(cfg.base_seed, k, theta, trial);
    let dims = cfg.layer_dims(k)?;
    let noise = noise_for_control(cfg.model, &dims, theta, cfg.sigma)?;
    let net = sample_gaussian_network(dims.as_slice(), cfg.variance_mode, derive_seed(seed, &[1]))?;
    let truth = sample_truth(&net, derive_seed(seed, &[2]))?;
    let inst =
        SpikedInstance::sample(truth, noise, derive_seed(seed, &[3]), Execution::Sequential)?;
    let opt = OptimizerConfig {
        seed: derive_seed(seed, &[4]),
        ..cfg.optimizer.clone()
    };
    let res = two_arm(&net, &inst, &opt, Execution::Sequential)?;
    let (samples, nu) = match noise {
        NoiseModel::Wishart { samples, .. } => (Some(samples), None),
        NoiseModel::Wigner { nu } => (None, Some(nu)),
    };
    let chosen = if res.chosen_arm == Arm::Plus {
        &res.plus
    } else {
        &res.minus
    };
    Ok(ScalingRow {
        model: cfg.model,
        k,
        theta,
        samples,
        nu,
        realized_theta: control_parameter(&dims, &noise)?,
        trial,
        seed,
        recon_error: res
            .recon_error
            .expect("sampled instances carry ground truth"),
        final_loss: res.final_loss,
        iterations: chosen.iterations,
        chosen_arm: res.chosen_arm,
        stop_reason: chosen.stop_reason,
        wall_ms: res.wall_ms,
    })
}

pub fn run_scaling(cfg: &ExperimentConfig) -> Result<ScalingOutput> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &k in &cfg.k_list {
        for &theta in &cfg.theta_list {
            for trial in 0..cfg.trials {
                jobs.push((k, theta, trial));
            }
        }
    }
    let exec = cfg.execution;
    let rows: Vec<ScalingRow> = exec
        .with_workers(cfg.workers, || {
            exec.map(&jobs, |&(k, theta, trial)| {
                let row = run_trial(cfg, k, theta, trial);
                if let Ok(r) = &row {
                    log::debug!(
                        "k={k} theta={theta} trial={trial} err={:.4e}",
                        r.recon_error
                    );
                }
                row
            })
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let aggregate = aggregate(cfg, &rows);
    let summary = summarize(cfg, &aggregate);
    Ok(ScalingOutput {
        config: cfg.clone(),
        rows,
        aggregate,
        summary,
    })
}

pub fn aggregate(cfg: &ExperimentConfig, rows: &[ScalingRow]) -> Vec<AggRow> {
    let mut out = Vec::new();
    for &k in &cfg.k_list {
        for &theta in &cfg.theta_list {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.k == k && r.theta == theta)
                .map(|r| r.recon_error)
                .collect();
            out.push(AggRow {
                k,
                theta,
                mean_err: mean(&errs),
                stderr: std_error(&errs),
                n_trials: errs.len(),
            });
        }
    }
    out
}

pub fn summarize(cfg: &ExperimentConfig, agg: &[AggRow]) -> ScalingSummary {
    let fits: Vec<CurveFit> = cfg
        .k_list
        .iter()
        .map(|&k| {
            let (x, y): (Vec<f64>, Vec<f64>) = agg
                .iter()
                .filter(|a| a.k == k)
                .map(|a| (a.theta, a.mean_err))
                .unzip();
            CurveFit {
                k,
                fit: fit_through_origin(&x, &y),
            }
        })
        .collect();
    let overlap: Vec<Overlap> = cfg
        .theta_list
        .iter()
        .map(|&theta| {
            let means: Vec<f64> = agg
                .iter()
                .filter(|a| a.theta == theta)
                .map(|a| a.mean_err)
                .collect();
            Overlap {
                theta,
                ratio: spread_ratio(&means),
            }
        })
        .collect();
    ScalingSummary {
        min_r_squared: fits
            .iter()
            .map(|f| f.fit.r_squared)
            .fold(f64::INFINITY, f64::min),
        max_overlap_ratio: overlap.iter().map(|o| o.ratio).fold(1.0, f64::max),
        fits,
        overlap,
    }
}

fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

pub fn scaling_svg(out: &ScalingOutput) -> String {
    let series: Vec<Series> = out
        .config
        .k_list
        .iter()
        .map(|&k| {
            let pts: Vec<&AggRow> = out.aggregate.iter().filter(|a| a.k == k).collect();
            Series {
                label: format!("k = {k}"),
                x: pts.iter().map(|a| a.theta).collect(),
                y: pts.iter().map(|a| a.mean_err).collect(),
                err: pts.iter().map(|a| a.stderr).collect(),
            }
        })
        .collect();
    let x_label = match out.config.model {
        ModelKind::Wishart => "theta_WS",
        ModelKind::Wigner => "theta_WG",
    };
    line_plot(
        &format!("{} reconstruction error", snake(&out.config.model)),
        x_label,
        "mean ||G(x) - y*||",
        &series,
    )
}

/// Writes `scaling_raw.csv`, `scaling_agg.csv`, `scaling.svg` and `report.json` into `dir`.
pub fn write_scaling(out: &ScalingOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("scaling_raw.csv"), Some(RAW_HEADER), &out.rows)?;
    write_csv(&dir.join("scaling_agg.csv"), None, &out.aggregate)?;
    fs::write(dir.join("scaling.svg"), scaling_svg(out))?;
    let report = serde_json::json!({
        "config": out.config,
        "aggregate": out.aggregate,
        "summary": out.summary,
    });
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    Ok(())
}
