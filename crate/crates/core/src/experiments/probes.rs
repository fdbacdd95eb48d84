//! WDC and landscape probes.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::{array, Array1};
use serde::{Deserialize, Serialize};

use super::stats::mean;
use super::write_csv;
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::generator::{
    check_expansivity, sample_gaussian_network, ExpansivityReport, GenerativeNetwork, LayerDims,
    VarianceMode,
};
use crate::landscape::{
    concentration_report, f_expected, h_field, rho, wdc_deviations, ConcentrationReport,
    LandscapeReport, ReportInputs,
};
use crate::linalg::norm;
use crate::objective::{loss, loss_and_gradient};
use crate::optimizer::sample_truth;
use crate::rng::derive_seed;
use crate::spiked::{omega_bound, NoiseModel, RankOneTarget, SpikedInstance, TargetOperator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WdcProbeConfig {
    pub dims: Vec<usize>,
    pub variance_mode: VarianceMode,
    pub num_pairs: usize,
    /// 1-based layers to probe; `None` probes every layer. Wide hidden layers
    /// cost `O(n_i n_{i−1}²)` per pair.
    pub layers: Option<Vec<usize>>,
    pub seed: u64,
    /// `ε` and `c` for the expansivity margins.
    pub epsilon: f64,
    pub c: f64,
    pub workers: usize,
    pub execution: Execution,
}

impl Default for WdcProbeConfig {
    fn default() -> Self {
        Self {
            dims: vec![5, 500, 2000],
            variance_mode: VarianceMode::Theory,
            num_pairs: 200,
            layers: None,
            seed: 0,
            epsilon: 0.1,
            c: 1.0,
            workers: 0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WdcLayer {
    pub layer: usize,
    pub n_in: usize,
    pub n_out: usize,
    /// Largest sampled deviation: a lower bound on the layer's WDC constant.
    pub max_deviation: f64,
    pub mean_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WdcProbeReport {
    pub dims: Vec<usize>,
    pub variance_mode: VarianceMode,
    pub num_pairs: usize,
    pub seed: u64,
    pub layers: Vec<WdcLayer>,
    pub epsilon_hat: f64,
    pub expansivity: ExpansivityReport,
}

/// Sampled WDC deviation of the selected 1-based `layers` of `net` (all when
/// `None`), measured in the `N(0, 1/n_i)` scale (weights of other variance
/// modes are divided by `√gain`). Layer `i` draws pairs from `derive_seed(seed, [i])`.
pub fn network_wdc(
    net: &GenerativeNetwork,
    layers: Option<&[usize]>,
    num_pairs: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<WdcLayer>> {
    let all: Vec<usize> = (1..=net.depth()).collect();
    let layers = layers.unwrap_or(&all);
    if layers.is_empty() || layers.iter().any(|&l| l == 0 || l > net.depth()) {
        return Err(invalid(format!(
            "layers must be a nonempty subset of 1..={}",
            net.depth()
        )));
    }
    let inv = 1.0 / net.variance_mode().gain().sqrt();
    layers
        .iter()
        .map(|&l| {
            let (i, w) = (l - 1, &net.weights()[l - 1]);
            let scaled = w * inv;
            let devs = wdc_deviations(
                scaled.view(),
                num_pairs,
                derive_seed(seed, &[i as u64 + 1]),
                exec,
            )?;
            Ok(WdcLayer {
                layer: i + 1,
                n_in: w.ncols(),
                n_out: w.nrows(),
                max_deviation: devs.iter().copied().fold(0.0, f64::max),
                mean_deviation: mean(&devs),
            })
        })
        .collect()
}

pub fn run_wdc_probe(cfg: &WdcProbeConfig) -> Result<WdcProbeReport> {
    let dims = LayerDims::new(cfg.dims.clone())?;
    let net = sample_gaussian_network(
        dims.as_slice(),
        cfg.variance_mode,
        derive_seed(cfg.seed, &[0]),
    )?;
    let layers = cfg.execution.with_workers(cfg.workers, || {
        network_wdc(
            &net,
            cfg.layers.as_deref(),
            cfg.num_pairs,
            cfg.seed,
            cfg.execution,
        )
    })?;
    Ok(WdcProbeReport {
        dims: cfg.dims.clone(),
        variance_mode: cfg.variance_mode,
        num_pairs: cfg.num_pairs,
        seed: cfg.seed,
        epsilon_hat: layers.iter().map(|l| l.max_deviation).fold(0.0, f64::max),
        layers,
        expansivity: check_expansivity(&dims, cfg.epsilon, cfg.c)?,
    })
}

pub fn write_wdc_probe(report: &WdcProbeReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("wdc_probe.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeProbeConfig {
    pub k: usize,
    pub n1: usize,
    pub n: usize,
    pub d: usize,
    pub variance_mode: VarianceMode,
    /// `None` probes the noiseless loss `¼‖G(x)G(x)ᵀ − y⋆y⋆ᵀ‖²_F`.
    pub noise: Option<NoiseModel>,
    /// Number of ray samples over `[−t_max, t_max]`.
    pub resolution: usize,
    pub t_max: f64,
    /// Polar grid sizes, used when `k = 2`.
    pub polar_radii: usize,
    pub polar_angles: usize,
    /// Pairs per layer for the WDC estimate `ε̂`.
    pub wdc_pairs: usize,
    pub k3: f64,
    pub k4: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for LandscapeProbeConfig {
    fn default() -> Self {
        Self {
            k: 5,
            n1: 120,
            n: 600,
            d: 2,
            variance_mode: VarianceMode::Experiment,
            noise: None,
            resolution: 801,
            t_max: 2.0,
            polar_radii: 40,
            polar_angles: 72,
            wdc_pairs: 50,
            k3: 1.0,
            k4: 1.0,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayPoint {
    /// Position `x = t·x⋆`.
    pub t: f64,
    pub f: f64,
    #[serde(rename = "f_E")]
    pub f_e: f64,
    /// `‖v_x‖`.
    pub grad_norm: f64,
    /// `‖h_x‖` in the network's weight scale.
    pub h_norm: f64,
    /// `⟨v_x, x̂⋆⟩`.
    pub radial: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub phi: f64,
    pub f: f64,
    #[serde(rename = "f_E")]
    pub f_e: f64,
    pub grad_norm: f64,
    pub h_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaySummary {
    pub rho_d: Option<f64>,
    pub grid_step: f64,
    pub positive_argmin_t: f64,
    pub f_positive_min: f64,
    pub f_origin: f64,
    pub f_plus_005: f64,
    pub f_minus_005: f64,
    /// Minimiser of `f` over `t < 0`, a stationary point along the ray.
    pub negative_argmin_t: f64,
    pub f_negative_min: f64,
    pub negative_argmin_t_expected: f64,
    /// `f(negative minimum) − f(positive minimum)`.
    pub separation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeProbeReport {
    pub config: LandscapeProbeConfig,
    pub dims: Vec<usize>,
    pub x_star: Vec<f64>,
    pub summary: RaySummary,
    /// Theoretical quantities at the negative-ray minimiser.
    pub landscape: LandscapeReport,
    pub concentration: Vec<ConcentrationProbe>,
    pub ray: Vec<RayPoint>,
    pub polar: Vec<PolarPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProbe {
    pub label: String,
    pub x: Vec<f64>,
    #[serde(flatten)]
    pub report: ConcentrationReport,
}

struct Probe<'a> {
    net: &'a GenerativeNetwork,
    target: &'a dyn TargetOperator,
    x_star: &'a Array1<f64>,
    scale: f64,
}

impl Probe<'_> {
    fn point(&self, x: &Array1<f64>) -> Result<(f64, f64, f64, f64, Array1<f64>)> {
        let d = self.net.depth();
        let (_, g) = loss_and_gradient(self.net, self.target, x.view())?;
        let f = loss(self.net, self.target, x.view(), true)?.value;
        let f_e = self.scale * f_expected(x.view(), self.x_star.view(), d)?;
        let h = h_field(x.view(), self.x_star.view(), d)? * self.scale;
        Ok((f, f_e, norm(g.view()), norm(h.view()), g))
    }
}

pub fn run_landscape_probe(cfg: &LandscapeProbeConfig) -> Result<LandscapeProbeReport> {
    if cfg.resolution < 3 || cfg.t_max.is_nan() || cfg.t_max <= 0.0 {
        return Err(invalid("the ray needs at least 3 points and t_max > 0"));
    }
    let dims = super::config::layer_dims(cfg.k, cfg.n1, cfg.n, cfg.d)?;
    let net = sample_gaussian_network(
        dims.as_slice(),
        cfg.variance_mode,
        derive_seed(cfg.seed, &[1]),
    )?;
    let truth = sample_truth(&net, derive_seed(cfg.seed, &[2]))?;
    let x_star = truth.x_star.clone();
    let y_norm = norm(truth.y_star.view());
    let noiseless = RankOneTarget::new(truth.y_star.clone());
    let noisy;
    let target: &dyn TargetOperator = match cfg.noise {
        None => &noiseless,
        Some(noise) => {
            noisy =
                SpikedInstance::sample(truth, noise, derive_seed(cfg.seed, &[3]), cfg.execution)?;
            &noisy
        }
    };
    let scale = cfg.variance_mode.quartic_factor(cfg.d);
    let probe = Probe {
        net: &net,
        target,
        x_star: &x_star,
        scale,
    };
    let unit = &x_star / norm(x_star.view());

    let step = 2.0 * cfg.t_max / (cfg.resolution - 1) as f64;
    let ray: Vec<RayPoint> = cfg
        .execution
        .map_indexed(cfg.resolution, |i| {
            let t = -cfg.t_max + step * i as f64;
            let x = &x_star * t;
            let (f, f_e, grad_norm, h_norm, g) = probe.point(&x)?;
            Ok(RayPoint {
                t,
                f,
                f_e,
                grad_norm,
                h_norm,
                radial: g.dot(&unit),
            })
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let argmin = |pred: &dyn Fn(f64) -> bool| {
        ray.iter()
            .filter(|p| pred(p.t))
            .min_by(|a, b| a.f.total_cmp(&b.f))
            .cloned()
            .expect("the ray has points on both sides of the origin")
    };
    let pos = argmin(&|t| t > 0.0);
    let neg = argmin(&|t| t < 0.0);
    let f_at = |t: f64| loss(&net, target, (&x_star * t).view(), true).map(|l| l.value);
    let rho_d = if cfg.d >= 2 { Some(rho(cfg.d)?) } else { None };
    let summary = RaySummary {
        rho_d,
        grid_step: step,
        positive_argmin_t: pos.t,
        f_positive_min: pos.f,
        f_origin: f_at(0.0)?,
        f_plus_005: f_at(0.05)?,
        f_minus_005: f_at(-0.05)?,
        negative_argmin_t: neg.t,
        f_negative_min: neg.f,
        negative_argmin_t_expected: -rho_d.unwrap_or(0.0),
        separation: neg.f - pos.f,
    };

    let polar = if cfg.k == 2 {
        let jobs: Vec<(usize, usize)> = (1..=cfg.polar_radii)
            .flat_map(|i| (0..cfg.polar_angles).map(move |j| (i, j)))
            .collect();
        let rmax = cfg.t_max * norm(x_star.view());
        let phi0 = x_star[1].atan2(x_star[0]);
        cfg.execution
            .map(&jobs, |&(i, j)| {
                let r = rmax * i as f64 / cfg.polar_radii as f64;
                let phi = 2.0 * PI * j as f64 / cfg.polar_angles as f64;
                let x = array![r * (phi0 + phi).cos(), r * (phi0 + phi).sin()];
                let (f, f_e, grad_norm, h_norm, _) = probe.point(&x)?;
                Ok(PolarPoint {
                    r,
                    phi,
                    f,
                    f_e,
                    grad_norm,
                    h_norm,
                })
            })
            .into_iter()
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let layers = network_wdc(
        &net,
        None,
        cfg.wdc_pairs,
        derive_seed(cfg.seed, &[4]),
        cfg.execution,
    )?;
    let epsilon_hat = layers.iter().map(|l| l.max_deviation).fold(0.0, f64::max);
    let omega = match &cfg.noise {
        None => 0.0,
        Some(noise) => omega_bound(&dims, noise, y_norm)?,
    };
    let neg_point = &x_star * neg.t;
    let landscape = LandscapeReport::compute(ReportInputs {
        x: neg_point.view(),
        x_star: x_star.view(),
        depth: cfg.d,
        variance_mode: cfg.variance_mode,
        epsilon_hat,
        omega,
        k3: cfg.k3,
        k4: cfg.k4,
        wdc_max_deviation: Some(epsilon_hat),
    })?;

    let mut probes = vec![
        ("half_truth".to_string(), &x_star * 0.5),
        ("negative_minimiser".to_string(), neg_point.clone()),
        ("double_truth".to_string(), &x_star * 2.0),
    ];
    if cfg.k >= 2 {
        let mut perp = Array1::zeros(cfg.k);
        perp[0] = -x_star[1];
        perp[1] = x_star[0];
        probes.push(("orthogonal".to_string(), perp));
    }
    let concentration = probes
        .into_iter()
        .map(|(label, x)| {
            Ok(ConcentrationProbe {
                report: concentration_report(&net, x.view(), x_star.view(), epsilon_hat)?,
                label,
                x: x.to_vec(),
            })
        })
        .collect::<Result<_>>()?;

    Ok(LandscapeProbeReport {
        config: cfg.clone(),
        dims: dims.as_slice().to_vec(),
        x_star: x_star.to_vec(),
        summary,
        landscape,
        concentration,
        ray,
        polar,
    })
}

/// Writes `landscape.json`, `landscape_ray.csv` and, for `k = 2`, `landscape_polar.csv`.
pub fn write_landscape_probe(report: &LandscapeProbeReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("landscape_ray.csv"), None, &report.ray)?;
    if !report.polar.is_empty() {
        write_csv(&dir.join("landscape_polar.csv"), None, &report.polar)?;
    }
    let json = serde_json::json!({
        "config": report.config,
        "dims": report.dims,
        "x_star": report.x_star,
        "summary": report.summary,
        "landscape": report.landscape,
        "concentration": report.concentration,
    });
    fs::write(
        dir.join("landscape.json"),
        serde_json::to_string_pretty(&json)? + "\n",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wdc_probe_is_deterministic_and_delegates_margins() {
        let cfg = WdcProbeConfig {
            dims: vec![3, 60, 200],
            num_pairs: 8,
            ..WdcProbeConfig::default()
        };
        let a = run_wdc_probe(&cfg).unwrap();
        let b = run_wdc_probe(&WdcProbeConfig {
            execution: Execution::Sequential,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(a, b);
        let dims = LayerDims::new(cfg.dims.clone()).unwrap();
        assert_eq!(a.expansivity, check_expansivity(&dims, 0.1, 1.0).unwrap());
        assert_eq!(a.layers.len(), 2);
    }

    #[test]
    fn small_planar_probe() {
        let cfg = LandscapeProbeConfig {
            k: 2,
            n1: 40,
            n: 150,
            resolution: 81,
            polar_radii: 4,
            polar_angles: 8,
            wdc_pairs: 4,
            ..LandscapeProbeConfig::default()
        };
        let r = run_landscape_probe(&cfg).unwrap();
        assert_eq!(r.ray.len(), 81);
        assert_eq!(r.polar.len(), 32);
        assert!((r.summary.positive_argmin_t - 1.0).abs() <= r.summary.grid_step + 1e-12);
        assert!(r.summary.f_origin > r.summary.f_plus_005);
    }
}
