//! Fast built-in checks runnable from the command line.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::generator::{sample_gaussian_network, VarianceMode};
use crate::landscape::{angle_contraction, f_expected, h_field, rho, wdc_expected_gram};
use crate::linalg::norm;
use crate::objective::{default_fd_step, fd_gradient, gradient, loss};
use crate::optimizer::{sample_truth, two_arm, OptimizerConfig};
use crate::rng::{self, derive_seed};
use crate::spiked::{sample_wigner, sample_wishart, Observation, SpikedInstance, TargetOperator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

fn rel(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    norm((a - b).view()) / norm(b.view()).max(f64::MIN_POSITIVE)
}

fn gradient_check(seed: u64) -> Result<Check> {
    let net = sample_gaussian_network(
        &[5, 50, 200],
        VarianceMode::Experiment,
        derive_seed(seed, &[1]),
    )?;
    let truth = sample_truth(&net, derive_seed(seed, &[2]))?;
    let inst = sample_wigner(truth.y_star.view(), 0.5, derive_seed(seed, &[3]))?;
    let mut stream = rng::stream(derive_seed(seed, &[4]));
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 10 {
        let x = rng::normal_vec(&mut stream, 5);
        let fd = match fd_gradient(&net, &inst, x.view(), default_fd_step(x.view())) {
            Ok(g) => g,
            Err(Error::SmoothnessGuardViolated { .. }) => continue,
            Err(e) => return Err(e),
        };
        worst = worst.max(rel(&gradient(&net, &inst, x.view())?, &fd));
        done += 1;
    }
    Ok(check(
        "gradient_vs_finite_difference",
        worst <= 1e-5,
        format!("max relative error {worst:e}"),
    ))
}

fn matvec_check(seed: u64) -> Result<Check> {
    let mut stream = rng::stream(derive_seed(seed, &[5]));
    let y = rng::normal_vec(&mut stream, 40);
    let inst = sample_wishart(y.view(), 0.8, 25, derive_seed(seed, &[6]))?;
    let s = inst
        .sample_matrix()
        .expect("sampled instances keep samples");
    let mut dense = s.t().dot(s) / 25.0;
    for i in 0..40 {
        dense[[i, i]] -= 0.64;
    }
    let v = rng::normal_vec(&mut stream, 40);
    let err = rel(&inst.apply(v.view()), &dense.dot(&v));
    let frob: f64 = dense.iter().map(|x| x * x).sum();
    let ferr = (inst.frobenius_sq() - frob).abs() / frob;
    Ok(check(
        "matrix_free_vs_dense",
        err <= 1e-10 && ferr <= 1e-10,
        format!("matvec {err:e}, frobenius {ferr:e}"),
    ))
}

fn anchors_check() -> Result<Check> {
    let x = Array1::from(vec![0.3, -1.0, 0.5]);
    let mut ok = (rho(2)? - 1.0 / PI).abs() <= 1e-12;
    ok &= angle_contraction(0.0)? == 0.0;
    ok &= angle_contraction(PI)? == PI / 2.0;
    ok &= wdc_expected_gram(x.view(), x.view())? == ndarray::Array2::<f64>::eye(3) * 0.5;
    ok &= norm(h_field(x.view(), x.view(), 2)?.view()) <= 1e-12;
    ok &= f_expected(x.view(), x.view(), 2)?.abs() <= 1e-12;
    Ok(check(
        "closed_form_anchors",
        ok,
        format!("rho_2 = {}", rho(2)?),
    ))
}

fn recovery_check(seed: u64) -> Result<Check> {
    let mut successes = 0;
    let trials = 5;
    for t in 0..trials {
        let s = derive_seed(seed, &[7, t]);
        let net = sample_gaussian_network(
            &[5, 120, 600],
            VarianceMode::Experiment,
            derive_seed(s, &[1]),
        )?;
        let truth = sample_truth(&net, derive_seed(s, &[2]))?;
        let y = truth.y_star.clone();
        let inst = SpikedInstance::new(
            Observation::Wigner(sample_wigner(y.view(), 0.0, s)?),
            Some(truth),
        );
        let cfg = OptimizerConfig {
            seed: derive_seed(s, &[4]),
            ..OptimizerConfig::default()
        };
        let res = two_arm(&net, &inst, &cfg, Execution::Sequential)?;
        if res.relative_error.unwrap_or(f64::INFINITY) <= 1e-3 {
            successes += 1;
        }
    }
    Ok(check(
        "noiseless_recovery",
        successes == trials,
        format!("{successes}/{trials} runs within 1e-3 relative error"),
    ))
}

fn exact_fit_check(seed: u64) -> Result<Check> {
    let net =
        sample_gaussian_network(&[4, 40, 160], VarianceMode::Theory, derive_seed(seed, &[8]))?;
    let truth = sample_truth(&net, derive_seed(seed, &[9]))?;
    let inst = sample_wigner(truth.y_star.view(), 0.0, 0)?;
    let f = loss(&net, &inst, truth.x_star.view(), true)?.value;
    let g = norm(gradient(&net, &inst, truth.x_star.view())?.view());
    Ok(check(
        "noiseless_global_minimum",
        f.abs() <= 1e-10 && g <= 1e-10,
        format!("f = {f:e}, |grad| = {g:e}"),
    ))
}

pub fn run_selftest(seed: u64) -> Result<SelftestReport> {
    let checks = vec![
        anchors_check()?,
        gradient_check(seed)?,
        matvec_check(seed)?,
        exact_fit_check(seed)?,
        recovery_check(seed)?,
    ];
    Ok(SelftestReport {
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

pub fn write_selftest(report: &SelftestReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("selftest.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    Ok(())
}
