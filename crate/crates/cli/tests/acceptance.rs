//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test --release -p spiked-gen-cli --test acceptance`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};

use spiked_gen::experiments::scaling::ScalingOutput;
use spiked_gen::experiments::{
    run_landscape_probe, run_scaling, ExperimentConfig, LandscapeProbeConfig,
};
use spiked_gen::landscape::{
    angle_contraction, f_expected, h_field, rho, wdc_deviation, wdc_expected_gram,
};
use spiked_gen::linalg::norm;
use spiked_gen::objective::{default_fd_step, fd_gradient, loss, smoothness_guard};
use spiked_gen::optimizer::{sample_truth, two_arm};
use spiked_gen::rng::{normal_vec, stream};
use spiked_gen::spiked::sample_wishart_covariance;
use spiked_gen::{
    gradient, m_matvec, sample_gaussian_network, sample_wigner, sample_wishart, Execution,
    GenerativeNetwork, ModelKind, NoiseModel, OptimizerConfig, SpikedInstance, TargetOperator,
    VarianceMode,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget: Duration, detail: String) -> Outcome {
    check(
        elapsed <= budget,
        format!(
            "{detail}; {:.1}s of {:.0}s budget",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ),
    )
}

fn rel_err(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    norm((a - b).view()) / norm(b.view()).max(f64::MIN_POSITIVE)
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let net = sample_gaussian_network(&[5, 50, 200], VarianceMode::Experiment, 101)
        .map_err(|e| e.to_string())?;
    let truth = sample_truth(&net, 102).map_err(|e| e.to_string())?;
    let mut worst = 0f64;
    let mut points = 0;
    for (i, noise) in [
        NoiseModel::Wishart {
            sigma: 1.0,
            samples: 100,
        },
        NoiseModel::Wigner { nu: 0.5 },
    ]
    .into_iter()
    .enumerate()
    {
        let inst =
            SpikedInstance::sample(truth.clone(), noise, 103 + i as u64, Execution::Sequential)
                .map_err(|e| e.to_string())?;
        let mut rng = stream(200 + i as u64);
        let mut accepted = 0;
        while accepted < 100 {
            let x = normal_vec(&mut rng, 5);
            let h = default_fd_step(x.view());
            if smoothness_guard(&net, x.view(), h).is_err() {
                continue;
            }
            let g = gradient(&net, &inst, x.view()).map_err(|e| e.to_string())?;
            let fd = fd_gradient(&net, &inst, x.view(), h).map_err(|e| e.to_string())?;
            worst = worst.max(rel_err(&g, &fd));
            accepted += 1;
        }
        points += accepted;
    }
    let detail = format!("{points} points over Wishart (N=100) and Wigner, max relative error {worst:.2e} (limit 1e-5)");
    check(worst <= 1e-5, detail.clone())?;
    within(t0.elapsed(), Duration::from_secs(30), detail)
}

fn dense_loss(g: &Array1<f64>, m: &Array2<f64>) -> f64 {
    let outer = g
        .view()
        .insert_axis(ndarray::Axis(1))
        .dot(&g.view().insert_axis(ndarray::Axis(0)));
    0.25 * (outer - m).iter().map(|v| v * v).sum::<f64>()
}

fn probe_dense<T: TargetOperator>(
    net: &GenerativeNetwork,
    target: &T,
    m: &Array2<f64>,
    seed: u64,
) -> Result<f64, String> {
    let mut rng = stream(seed);
    let mut worst = 0f64;
    for _ in 0..50 {
        let v = normal_vec(&mut rng, m.nrows());
        let got = m_matvec(target, v.view()).map_err(|e| e.to_string())?;
        worst = worst.max(rel_err(&got, &m.dot(&v)));
        let x = normal_vec(&mut rng, net.latent_dim());
        let f = loss(net, target, x.view(), true)
            .map_err(|e| e.to_string())?
            .value;
        let want = dense_loss(&net.forward(x.view()).map_err(|e| e.to_string())?, m);
        worst = worst.max((f - want).abs() / want.abs());
    }
    Ok(worst)
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let n = 200;
    let net = sample_gaussian_network(&[5, 60, n], VarianceMode::Experiment, 111)
        .map_err(|e| e.to_string())?;
    let truth = sample_truth(&net, 112).map_err(|e| e.to_string())?;
    let y_star = truth.y_star.view();
    let eye = Array2::<f64>::eye(n);
    let mut worst = 0f64;
    for samples in [60, 400] {
        let inst = sample_wishart(y_star, 1.0, samples, 113).map_err(|e| e.to_string())?;
        let y = inst.sample_matrix().ok_or("raw samples expected")?;
        let m = y.t().dot(y) / samples as f64 - &eye;
        worst = worst.max(probe_dense(&net, &inst, &m, 114)?);
    }
    let cov = sample_wishart_covariance(y_star, 1.0, 5000, 115, Execution::Parallel)
        .map_err(|e| e.to_string())?;
    worst = worst.max(probe_dense(&net, &cov, &(cov.covariance() - &eye), 116)?);
    let wig = sample_wigner(y_star, 0.7, 117).map_err(|e| e.to_string())?;
    worst = worst.max(probe_dense(&net, &wig, &wig.matrix().clone(), 118)?);
    let detail = format!("Wishart (samples, covariance) and Wigner at n={n}, 50 probes each, max relative error {worst:.2e} (limit 1e-9)");
    check(worst <= 1e-9, detail.clone())?;
    within(t0.elapsed(), Duration::from_secs(10), detail)
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let fail = |what: &str| Err(format!("{what} failed"));
    let rho2 = rho(2).map_err(|e| e.to_string())?;
    if (rho2 - 1.0 / PI).abs() > 1e-12 {
        return fail("rho(2) = 1/π");
    }
    if angle_contraction(0.0).map_err(|e| e.to_string())? != 0.0 {
        return fail("g(0) = 0");
    }
    if angle_contraction(PI).map_err(|e| e.to_string())? != PI / 2.0 {
        return fail("g(π) = π/2");
    }
    let x = ndarray::array![0.3, -1.2, 0.7, 2.0];
    let q = wdc_expected_gram(x.view(), x.view()).map_err(|e| e.to_string())?;
    if q != Array2::<f64>::eye(4) * 0.5 {
        return fail("Q(x, x) = I/2");
    }
    let scale = norm(x.view()).powi(3);
    for d in [2, 3, 5] {
        let h = h_field(x.view(), x.view(), d).map_err(|e| e.to_string())?;
        let f = f_expected(x.view(), x.view(), d).map_err(|e| e.to_string())?;
        if norm(h.view()) > 1e-12 * scale || f.abs() > 1e-12 * scale * norm(x.view()) {
            return fail("h_field(x⋆) = 0 and f_expected(x⋆) = 0");
        }
    }
    within(
        t0.elapsed(),
        Duration::from_secs(1),
        format!("rho(2) = {rho2:.15}, g(0) = 0, g(π) = π/2, Q(x,x) = I/2, h(x⋆) = f_E(x⋆) = 0"),
    )
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let mut successes = 0;
    let runs = 20u64;
    let mut worst = 0f64;
    for s in 0..runs {
        let net = sample_gaussian_network(&[5, 120, 600], VarianceMode::Experiment, 1000 + s)
            .map_err(|e| e.to_string())?;
        let truth = sample_truth(&net, 2000 + s).map_err(|e| e.to_string())?;
        let inst = SpikedInstance::sample(
            truth,
            NoiseModel::Wigner { nu: 0.0 },
            3000 + s,
            Execution::Sequential,
        )
        .map_err(|e| e.to_string())?;
        let cfg = OptimizerConfig {
            seed: 4000 + s,
            ..OptimizerConfig::default()
        };
        let r = two_arm(&net, &inst, &cfg, Execution::Parallel).map_err(|e| e.to_string())?;
        let rel = r.relative_error.ok_or("missing ground truth")?;
        worst = worst.max(rel);
        if rel <= 1e-3 {
            successes += 1;
        }
    }
    let detail =
        format!("{successes}/{runs} runs within 1e-3 relative error (need 19), worst {worst:.2e}");
    check(successes * 100 >= 95 * runs, detail.clone())?;
    within(t0.elapsed(), Duration::from_secs(120), detail)
}

fn scaling_verdict(out: &ScalingOutput) -> (bool, String) {
    let s = &out.summary;
    let fits: Vec<String> = s
        .fits
        .iter()
        .map(|f| {
            format!(
                "k={} slope {:.3} R² {:.3}",
                f.k, f.fit.slope, f.fit.r_squared
            )
        })
        .collect();
    let means: Vec<String> = out
        .aggregate
        .iter()
        .map(|a| {
            format!(
                "(k={}, θ={}) {:.4}±{:.4}",
                a.k, a.theta, a.mean_err, a.stderr
            )
        })
        .collect();
    let ok = s.min_r_squared >= 0.9 && s.max_overlap_ratio <= 2.0;
    (
        ok,
        format!(
            "{:?}: {}; max k-curve ratio {:.3}; means {}",
            out.config.model,
            fits.join(", "),
            s.max_overlap_ratio,
            means.join(" ")
        ),
    )
}

fn criterion_5(dir: &Path) -> Outcome {
    let t0 = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for model in [ModelKind::Wishart, ModelKind::Wigner] {
        let cfg = ExperimentConfig {
            model,
            k_list: vec![10, 30],
            n1: 250,
            n: 1700,
            d: 2,
            theta_list: vec![0.1, 0.2, 0.4],
            trials: 20,
            base_seed: 2024,
            output_dir: dir.join(format!("{model:?}").to_lowercase()),
            ..ExperimentConfig::default()
        };
        let out = run_scaling(&cfg).map_err(|e| e.to_string())?;
        spiked_gen::experiments::scaling::write_scaling(&out, &cfg.output_dir)
            .map_err(|e| e.to_string())?;
        let (pass, detail) = scaling_verdict(&out);
        ok &= pass;
        details.push(detail);
    }
    let detail = details.join(" | ");
    check(ok, detail.clone())?;
    within(t0.elapsed(), Duration::from_secs(30 * 60), detail)
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let cfg = LandscapeProbeConfig {
        seed: 7,
        ..LandscapeProbeConfig::default()
    };
    let rep = run_landscape_probe(&cfg).map_err(|e| e.to_string())?;
    let s = &rep.summary;
    let rho2 = 1.0 / PI;
    let a = (s.positive_argmin_t - 1.0).abs() <= s.grid_step;
    let b = s.f_origin > s.f_plus_005 && s.f_origin > s.f_minus_005;
    let c = (s.negative_argmin_t + rho2).abs() <= 0.1 && s.f_negative_min > s.f_positive_min;
    let detail = format!(
        "(a) positive argmin t = {:.4} (step {:.4}); (b) f(0) = {:.5} vs f(±0.05) = {:.5}, {:.5}; \
         (c) negative argmin t = {:.4} vs −1/π = {:.4}, f there {:.5} > f near x⋆ {:.2e}",
        s.positive_argmin_t,
        s.grid_step,
        s.f_origin,
        s.f_plus_005,
        s.f_minus_005,
        s.negative_argmin_t,
        -rho2,
        s.f_negative_min,
        s.f_positive_min
    );
    check(a && b && c, detail.clone())?;
    within(t0.elapsed(), Duration::from_secs(60), detail)
}

fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let mut devs = Vec::new();
    for n in [500, 2000, 8000] {
        let net = sample_gaussian_network(&[5, n], VarianceMode::Theory, 77)
            .map_err(|e| e.to_string())?;
        devs.push(
            wdc_deviation(net.weights()[0].view(), 200, 78, Execution::Parallel)
                .map_err(|e| e.to_string())?,
        );
    }
    let detail = format!(
        "max deviation over 200 pairs: n=500 {:.4}, n=2000 {:.4}, n=8000 {:.4}",
        devs[0], devs[1], devs[2]
    );
    check(devs[0] > devs[1] && devs[1] > devs[2], detail.clone())?;
    within(t0.elapsed(), Duration::from_secs(120), detail)
}

fn snapshot(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        let bytes = fs::read(&p).map_err(|e| e.to_string())?;
        files.push((p, bytes));
    }
    files.sort();
    Ok(files)
}

fn run_cli(args: &[&str], config: Option<&Path>, out: &Path) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spiked-gen"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    let res = cmd
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    if res.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&res.stderr)
        ))
    }
}

fn criterion_8(dir: &Path) -> Outcome {
    let cases: [(&[&str], &str); 6] = [
        (
            &["scaling", "--model", "wishart", "--seed", "3"],
            r#"{"k_list":[2,4],"n1":20,"n":80,"theta_list":[0.2,0.4],"trials":3}"#,
        ),
        (
            &["scaling", "--model", "wigner", "--trials", "2"],
            r#"{"k_list":[2,4],"n1":20,"n":80,"theta_list":[0.1,0.3]}"#,
        ),
        (
            &["wdc-probe", "--seed", "5"],
            r#"{"dims":[4,60,200],"num_pairs":20}"#,
        ),
        (
            &["landscape-probe", "--seed", "6"],
            r#"{"k":2,"n1":40,"n":160,"resolution":201,"polar_radii":6,"polar_angles":12,"wdc_pairs":5}"#,
        ),
        (
            &["recover", "--seed", "8"],
            r#"{"model":"wishart","k":3,"n1":30,"n":120,"theta":0.3}"#,
        ),
        (&["selftest", "--seed", "9"], "{}"),
    ];
    let mut names = Vec::new();
    let mut file_count = 0;
    for (i, (args, config_json)) in cases.iter().enumerate() {
        let case_dir = dir.join(format!("case{i}"));
        fs::create_dir_all(&case_dir).map_err(|e| e.to_string())?;
        let cfg_path = case_dir.join("config.json");
        let config = (args[0] != "selftest").then_some(cfg_path.as_path());
        if config.is_some() {
            fs::write(&cfg_path, config_json).map_err(|e| e.to_string())?;
        }
        let out = case_dir.join("out");
        let run = |out: &Path| run_cli(args, config, out);
        run(&out)?;
        let first = snapshot(&out)?;
        fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
        run(&out)?;
        let second = snapshot(&out)?;
        if first.is_empty() || first != second {
            return Err(format!("{} output differs between reruns", args[0]));
        }
        file_count += first.len();
        names.push(args[0]);
    }
    names.dedup();
    Ok(format!(
        "{} subcommands ({} runs), {file_count} CSV/JSON/SVG files byte-identical on rerun",
        names.len(),
        cases.len()
    ))
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let keep = std::env::var_os("ACCEPTANCE_OUT").map(PathBuf::from);
    let scaling_dir = keep.clone().unwrap_or_else(|| tmp.path().join("scaling"));
    let criteria: Vec<(&str, Criterion<'_>)> = vec![
        ("1 gradient vs finite differences", Box::new(criterion_1)),
        ("2 matrix-free vs dense", Box::new(criterion_2)),
        ("3 closed-form anchors", Box::new(criterion_3)),
        ("4 noiseless recovery", Box::new(criterion_4)),
        ("5 scaling law", Box::new(move || criterion_5(&scaling_dir))),
        ("6 landscape geometry", Box::new(criterion_6)),
        ("7 WDC trend", Box::new(criterion_7)),
        (
            "8 determinism",
            Box::new(|| criterion_8(&tmp.path().join("determinism"))),
        ),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let t0 = Instant::now();
        let outcome = run();
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
