use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use spiked_gen::experiments::probes::{write_landscape_probe, write_wdc_probe};
use spiked_gen::experiments::recover::write_recover;
use spiked_gen::experiments::scaling::write_scaling;
use spiked_gen::experiments::selftest::write_selftest;
use spiked_gen::experiments::{
    run_landscape_probe, run_recover, run_scaling, run_selftest, run_wdc_probe, ExperimentConfig,
    LandscapeProbeConfig, RecoverConfig, WdcProbeConfig,
};
use spiked_gen::ModelKind;

#[derive(Parser)]
#[command(
    name = "spiked-gen",
    version,
    about = "Spike recovery under generative ReLU priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruction error against the noise control parameter.
    Scaling(Common),
    /// Sampled WDC deviations and expansivity margins per layer.
    WdcProbe(Common),
    /// Loss, expected loss and gradient norms along the ray through x⋆.
    LandscapeProbe(Common),
    /// Recover one planted spike.
    Recover(Common),
    /// Fast built-in checks.
    Selftest(Common),
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// JSON config; its field names mirror the library config structs.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    model: Option<Model>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Model {
    Wishart,
    Wigner,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Wishart => ModelKind::Wishart,
            Model::Wigner => ModelKind::Wigner,
        }
    }
}

fn load<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn ignored(flag: &str, value: &Option<impl std::fmt::Debug>, command: &str) {
    if let Some(v) = value {
        log::warn!("--{flag} {v:?} has no effect on {command}");
    }
}

fn out_dir(c: &Common, fallback: &Path) -> PathBuf {
    c.out.clone().unwrap_or_else(|| fallback.to_path_buf())
}

fn print(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn scaling(c: &Common) -> Result<()> {
    let mut cfg: ExperimentConfig = load(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.base_seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(m) = c.model {
        cfg.model = m.into();
    }
    let dir = out_dir(c, &cfg.output_dir);
    cfg.output_dir = dir.clone();
    let out = run_scaling(&cfg)?;
    write_scaling(&out, &dir)?;
    print(&serde_json::json!({"output_dir": dir, "summary": out.summary}))
}

fn wdc_probe(c: &Common) -> Result<()> {
    let mut cfg: WdcProbeConfig = load(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    ignored("trials", &c.trials, "wdc-probe");
    ignored("model", &c.model, "wdc-probe");
    let dir = out_dir(c, Path::new("out"));
    let report = run_wdc_probe(&cfg)?;
    write_wdc_probe(&report, &dir)?;
    print(
        &serde_json::json!({"output_dir": dir, "epsilon_hat": report.epsilon_hat, "layers": report.layers}),
    )
}

fn landscape_probe(c: &Common) -> Result<()> {
    let mut cfg: LandscapeProbeConfig = load(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    ignored("trials", &c.trials, "landscape-probe");
    ignored("model", &c.model, "landscape-probe");
    let dir = out_dir(c, Path::new("out"));
    let report = c.workers.map_or_else(
        || run_landscape_probe(&cfg),
        |w| cfg.execution.with_workers(w, || run_landscape_probe(&cfg)),
    )?;
    write_landscape_probe(&report, &dir)?;
    print(&serde_json::json!({"output_dir": dir, "summary": report.summary}))
}

fn recover(c: &Common) -> Result<()> {
    let mut cfg: RecoverConfig = load(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = c.model {
        cfg.model = m.into();
        if cfg.model == ModelKind::Wishart && cfg.theta == 0.0 {
            bail!("Wishart recovery needs a positive theta");
        }
    }
    ignored("trials", &c.trials, "recover");
    let dir = out_dir(c, Path::new("out"));
    let report = c.workers.map_or_else(
        || run_recover(&cfg),
        |w| cfg.execution.with_workers(w, || run_recover(&cfg)),
    )?;
    write_recover(&report, &dir)?;
    print(&serde_json::json!({
        "output_dir": dir,
        "noise": report.noise,
        "recon_error": report.result.recon_error,
        "chosen_arm": report.result.chosen_arm,
        "iterations": report.result.iterations(),
    }))
}

fn selftest(c: &Common) -> Result<()> {
    if c.config.is_some() {
        log::warn!("selftest takes no config file");
    }
    ignored("trials", &c.trials, "selftest");
    ignored("model", &c.model, "selftest");
    ignored("workers", &c.workers, "selftest");
    let dir = out_dir(c, Path::new("out"));
    let report = run_selftest(c.seed.unwrap_or(0))?;
    write_selftest(&report, &dir)?;
    for check in &report.checks {
        println!(
            "{} {}: {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    if !report.passed {
        bail!("self-test failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Scaling(c) => scaling(c),
        Command::WdcProbe(c) => wdc_probe(c),
        Command::LandscapeProbe(c) => landscape_probe(c),
        Command::Recover(c) => recover(c),
        Command::Selftest(c) => selftest(c),
    }
}
