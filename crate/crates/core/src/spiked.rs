//! Spiked Wishart and Wigner observations and the target matrix `M`.
//!
//! Wishart: `Y = u y⋆ᵀ + σZ` with `u ∈ R^N`, and `M = YᵀY/N − σ²I`.
//! Wigner: `Y = y⋆y⋆ᵀ + νH` with `H ~ GOE(n)`, and `M = Y`.
//!
//! `M` is reached only through [`TargetOperator::apply`]; for Wishart samples
//! the `n × n` Gram is never formed on that path.

use std::path::Path;
use std::sync::OnceLock;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use crate::container::{Container, ContainerKind};
use crate::error::{check_len, invalid, Error, Result};
use crate::exec::Execution;
use crate::generator::LayerDims;
use crate::linalg::{frobenius_sq, gram};
use crate::rng;

/// Matrix-free access to a symmetric target `M`.
pub trait TargetOperator: Sync {
    fn dim(&self) -> usize;

    /// `M v`; callers guarantee `v.len() == self.dim()`.
    fn apply(&self, v: ArrayView1<f64>) -> Array1<f64>;

    /// `‖M‖²_F`.
    fn frobenius_sq(&self) -> f64;

    /// Planted signal, when known; used only to score recoveries.
    fn truth(&self) -> Option<&GroundTruth> {
        None
    }
}

/// `M v` with a dimension check.
pub fn m_matvec<T: TargetOperator + ?Sized>(target: &T, v: ArrayView1<f64>) -> Result<Array1<f64>> {
    check_len("target vector", target.dim(), v.len())?;
    Ok(target.apply(v))
}

pub fn m_frobenius_sq<T: TargetOperator + ?Sized>(target: &T) -> f64 {
    target.frobenius_sq()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Wishart,
    Wigner,
}

/// Noise parameters of an observation model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Wishart { sigma: f64, samples: usize },
    Wigner { nu: f64 },
}

impl NoiseModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            NoiseModel::Wishart { .. } => ModelKind::Wishart,
            NoiseModel::Wigner { .. } => ModelKind::Wigner,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Wishart { sigma, samples } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid(format!("sigma must be positive, got {sigma}")));
                }
                if samples == 0 {
                    return Err(invalid("the sample count N must be at least 1"));
                }
            }
            NoiseModel::Wigner { nu } => {
                if !(nu >= 0.0 && nu.is_finite()) {
                    return Err(invalid(format!("nu must be nonnegative, got {nu}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum WishartData {
    /// The `N × n` sample matrix.
    Samples(Array2<f64>),
    /// The empirical covariance `Σ_N = YᵀY/N`.
    Covariance(Array2<f64>),
}

#[derive(Clone, Debug)]
pub struct WishartInstance {
    data: WishartData,
    sigma: f64,
    samples: usize,
    dim: usize,
    trace_cov: f64,
    frob: OnceLock<f64>,
    seed: Option<u64>,
}

impl PartialEq for WishartInstance {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
            && self.sigma == other.sigma
            && self.samples == other.samples
            && self.seed == other.seed
    }
}

/// Draws `Y = u y⋆ᵀ + σZ` row by row: `u_i`, then `z_i1 … z_in`.
pub fn sample_wishart(
    y_star: ArrayView1<f64>,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<WishartInstance> {
    NoiseModel::Wishart { sigma, samples }.validate()?;
    let n = y_star.len();
    let mut stream = rng::stream(seed);
    let mut y = Array2::zeros((samples, n));
    for mut row in y.rows_mut() {
        let u = rng::normal(&mut stream);
        for (dst, &ys) in row.iter_mut().zip(y_star) {
            *dst = u * ys + sigma * rng::normal(&mut stream);
        }
    }
    let mut inst = WishartInstance::from_samples(y, sigma)?;
    inst.seed = Some(seed);
    Ok(inst)
}

/// Draws `Σ_N` directly with the same law as `sample_wishart(..).covariance()`.
///
/// For `N > n` the cross-products of the augmented data `[u Z]` follow
/// `Wishart_{n+1}(N, I)` and are drawn through the Bartlett factor, so the cost
/// does not grow with `N`. Otherwise the samples are drawn and their Gram formed.
pub fn sample_wishart_covariance(
    y_star: ArrayView1<f64>,
    sigma: f64,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<WishartInstance> {
    NoiseModel::Wishart { sigma, samples }.validate()?;
    let n = y_star.len();
    if samples <= n {
        let raw = sample_wishart(y_star, sigma, samples, seed)?;
        let WishartData::Samples(y) = &raw.data else {
            unreachable!("sample_wishart stores samples")
        };
        let cov = gram(y.view(), exec) / samples as f64;
        let mut inst = WishartInstance::from_covariance(cov, sigma, samples)?;
        inst.seed = Some(seed);
        return Ok(inst);
    }

    let p = n + 1;
    let mut stream = rng::stream(seed);
    let mut a = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..i {
            a[[i, j]] = rng::normal(&mut stream);
        }
        let chi = ChiSquared::new((samples - i) as f64).map_err(|e| invalid(e.to_string()))?;
        a[[i, i]] = chi.sample(&mut stream).sqrt();
    }
    let s_full = lower_times_transpose(a.view(), exec);

    let uu = s_full[[0, 0]];
    let w = s_full.slice(s![1.., 0]);
    let mut cov = s_full.slice(s![1.., 1..]).to_owned();
    cov *= sigma * sigma;
    for i in 0..n {
        for j in 0..n {
            cov[[i, j]] +=
                uu * y_star[i] * y_star[j] + sigma * (y_star[i] * w[j] + w[i] * y_star[j]);
        }
    }
    cov /= samples as f64;
    let mut inst = WishartInstance::from_covariance(cov, sigma, samples)?;
    inst.seed = Some(seed);
    Ok(inst)
}

/// `A Aᵀ` for lower-triangular `A`, exactly symmetric.
fn lower_times_transpose(a: ArrayView2<f64>, exec: Execution) -> Array2<f64> {
    let p = a.nrows();
    let rows = exec.map_indexed(p, |i| {
        let ai = a.slice(s![i, ..=i]);
        (0..=i)
            .map(|j| ai.slice(s![..=j]).dot(&a.slice(s![j, ..=j])))
            .collect::<Vec<f64>>()
    });
    let mut out = Array2::zeros((p, p));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

impl WishartInstance {
    pub fn from_samples(y: Array2<f64>, sigma: f64) -> Result<Self> {
        NoiseModel::Wishart {
            sigma,
            samples: y.nrows(),
        }
        .validate()?;
        let samples = y.nrows();
        let dim = y.ncols();
        let trace_cov = frobenius_sq(y.view()) / samples as f64;
        Ok(Self {
            data: WishartData::Samples(y),
            sigma,
            samples,
            dim,
            trace_cov,
            frob: OnceLock::new(),
            seed: None,
        })
    }

    pub fn from_covariance(cov: Array2<f64>, sigma: f64, samples: usize) -> Result<Self> {
        NoiseModel::Wishart { sigma, samples }.validate()?;
        if cov.nrows() != cov.ncols() {
            return Err(Error::Dimension {
                what: "covariance columns",
                expected: cov.nrows(),
                got: cov.ncols(),
            });
        }
        let dim = cov.nrows();
        let trace_cov = cov.diag().sum();
        let frob = OnceLock::new();
        let _ = frob.set(
            frobenius_sq(cov.view()) - 2.0 * sigma * sigma * trace_cov + dim as f64 * sigma.powi(4),
        );
        Ok(Self {
            data: WishartData::Covariance(cov),
            sigma,
            samples,
            dim,
            trace_cov,
            frob,
            seed: None,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `tr(Σ_N)`.
    pub fn trace_covariance(&self) -> f64 {
        self.trace_cov
    }

    /// The `N × n` samples, if this instance keeps them.
    pub fn sample_matrix(&self) -> Option<&Array2<f64>> {
        match &self.data {
            WishartData::Samples(y) => Some(y),
            WishartData::Covariance(_) => None,
        }
    }

    /// `Σ_N`, formed from the samples if necessary.
    pub fn covariance(&self) -> Array2<f64> {
        match &self.data {
            WishartData::Samples(y) => gram(y.view(), Execution::Sequential) / self.samples as f64,
            WishartData::Covariance(c) => c.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let meta = serde_json::json!({
            "sigma": self.sigma,
            "samples": self.samples,
            "n": self.dim,
            "seed": self.seed,
        });
        let (kind, name, a) = match &self.data {
            WishartData::Samples(y) => (ContainerKind::Wishart, "Y", y.clone()),
            WishartData::Covariance(c) => (ContainerKind::WishartCovariance, "Sigma_N", c.clone()),
        };
        Container::new(kind, meta, vec![(name.into(), a)]).write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut c = Container::read(path)?;
        let sigma: f64 = serde_json::from_value(c.meta_field("sigma")?)?;
        let samples: usize = serde_json::from_value(c.meta_field("samples")?)?;
        let seed: Option<u64> = serde_json::from_value(c.meta_field("seed")?)?;
        let mut inst = match c.kind {
            ContainerKind::Wishart => Self::from_samples(c.take("Y")?, sigma)?,
            ContainerKind::WishartCovariance => {
                Self::from_covariance(c.take("Sigma_N")?, sigma, samples)?
            }
            other => {
                return Err(Error::Format(format!(
                    "expected a Wishart container, found {other:?}"
                )))
            }
        };
        if inst.samples != samples {
            return Err(Error::Format(format!(
                "header says N = {samples}, data has {}",
                inst.samples
            )));
        }
        inst.seed = seed;
        Ok(inst)
    }
}

impl TargetOperator for WishartInstance {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let s2 = self.sigma * self.sigma;
        match &self.data {
            WishartData::Samples(y) => {
                let yv = y.dot(&v);
                let mut out = y.t().dot(&yv) / self.samples as f64;
                out.scaled_add(-s2, &v);
                out
            }
            WishartData::Covariance(c) => {
                let mut out = c.dot(&v);
                out.scaled_add(-s2, &v);
                out
            }
        }
    }

    fn frobenius_sq(&self) -> f64 {
        *self.frob.get_or_init(|| {
            let WishartData::Samples(y) = &self.data else {
                unreachable!("covariance instances are cached at construction")
            };
            // The smaller of YYᵀ and YᵀY has the same Frobenius norm.
            let g = if self.samples < self.dim {
                gram(y.t(), Execution::Sequential)
            } else {
                gram(y.view(), Execution::Sequential)
            };
            let cov_sq = frobenius_sq(g.view()) / (self.samples as f64).powi(2);
            let s2 = self.sigma * self.sigma;
            cov_sq - 2.0 * s2 * self.trace_cov + self.dim as f64 * s2 * s2
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerInstance {
    y: Array2<f64>,
    nu: f64,
    frob: f64,
    seed: Option<u64>,
}

/// Draws `Y = y⋆y⋆ᵀ + νH`; `H` is filled from its lower triangle in row-major order.
pub fn sample_wigner(y_star: ArrayView1<f64>, nu: f64, seed: u64) -> Result<WignerInstance> {
    NoiseModel::Wigner { nu }.validate()?;
    let n = y_star.len();
    if n == 0 {
        return Err(invalid("the spike must be nonempty"));
    }
    let off = (1.0 / n as f64).sqrt();
    let diag = (2.0 / n as f64).sqrt();
    let mut stream = rng::stream(seed);
    let mut y = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let std = if i == j { diag } else { off };
            let v = y_star[i] * y_star[j] + nu * std * rng::normal(&mut stream);
            y[[i, j]] = v;
            y[[j, i]] = v;
        }
    }
    let mut inst = WignerInstance::from_matrix(y, nu)?;
    inst.seed = Some(seed);
    Ok(inst)
}

impl WignerInstance {
    /// Wraps an exactly symmetric observation.
    pub fn from_matrix(y: Array2<f64>, nu: f64) -> Result<Self> {
        NoiseModel::Wigner { nu }.validate()?;
        if y.nrows() != y.ncols() {
            return Err(Error::Dimension {
                what: "Wigner columns",
                expected: y.nrows(),
                got: y.ncols(),
            });
        }
        let n = y.nrows();
        for i in 0..n {
            for j in 0..i {
                if y[[i, j]] != y[[j, i]] {
                    return Err(invalid(format!(
                        "observation is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let frob = frobenius_sq(y.view());
        Ok(Self {
            y,
            nu,
            frob,
            seed: None,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let meta = serde_json::json!({"nu": self.nu, "n": self.y.nrows(), "seed": self.seed});
        Container::new(
            ContainerKind::Wigner,
            meta,
            vec![("Y".into(), self.y.clone())],
        )
        .write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut c = Container::read(path)?;
        c.expect_kind(ContainerKind::Wigner)?;
        let nu: f64 = serde_json::from_value(c.meta_field("nu")?)?;
        let seed: Option<u64> = serde_json::from_value(c.meta_field("seed")?)?;
        let mut inst = Self::from_matrix(c.take("Y")?, nu)?;
        inst.seed = seed;
        Ok(inst)
    }
}

impl TargetOperator for WignerInstance {
    fn dim(&self) -> usize {
        self.y.nrows()
    }

    fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        self.y.dot(&v)
    }

    fn frobenius_sq(&self) -> f64 {
        self.frob
    }
}

/// Noiseless target `M = y yᵀ`, held as the vector `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneTarget {
    y: Array1<f64>,
}

impl RankOneTarget {
    pub fn new(y: Array1<f64>) -> Self {
        Self { y }
    }

    pub fn spike(&self) -> &Array1<f64> {
        &self.y
    }
}

impl TargetOperator for RankOneTarget {
    fn dim(&self) -> usize {
        self.y.len()
    }

    fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        &self.y * self.y.dot(&v)
    }

    fn frobenius_sq(&self) -> f64 {
        self.y.dot(&self.y).powi(2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    Wishart(WishartInstance),
    Wigner(WignerInstance),
}

/// Latent and signal used to build an instance; kept for evaluation only.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub x_star: Array1<f64>,
    pub y_star: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpikedInstance {
    pub observation: Observation,
    pub truth: Option<GroundTruth>,
}

impl SpikedInstance {
    pub fn new(observation: Observation, truth: Option<GroundTruth>) -> Self {
        Self { observation, truth }
    }

    /// Samples an observation of `y⋆` under `noise`. Wishart instances are
    /// stored as covariances, which is how the experiment harness uses them.
    pub fn sample(
        truth: GroundTruth,
        noise: NoiseModel,
        seed: u64,
        exec: Execution,
    ) -> Result<Self> {
        let observation = match noise {
            NoiseModel::Wishart { sigma, samples } => Observation::Wishart(
                sample_wishart_covariance(truth.y_star.view(), sigma, samples, seed, exec)?,
            ),
            NoiseModel::Wigner { nu } => {
                Observation::Wigner(sample_wigner(truth.y_star.view(), nu, seed)?)
            }
        };
        Ok(Self::new(observation, Some(truth)))
    }

    pub fn kind(&self) -> ModelKind {
        match self.observation {
            Observation::Wishart(_) => ModelKind::Wishart,
            Observation::Wigner(_) => ModelKind::Wigner,
        }
    }

    pub fn noise(&self) -> NoiseModel {
        match &self.observation {
            Observation::Wishart(w) => NoiseModel::Wishart {
                sigma: w.sigma,
                samples: w.samples,
            },
            Observation::Wigner(w) => NoiseModel::Wigner { nu: w.nu },
        }
    }

    fn target(&self) -> &dyn TargetOperator {
        match &self.observation {
            Observation::Wishart(w) => w,
            Observation::Wigner(w) => w,
        }
    }
}

impl TargetOperator for SpikedInstance {
    fn dim(&self) -> usize {
        self.target().dim()
    }

    fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        self.target().apply(v)
    }

    fn frobenius_sq(&self) -> f64 {
        self.target().frobenius_sq()
    }

    fn truth(&self) -> Option<&GroundTruth> {
        self.truth.as_ref()
    }
}

/// `ln Π_{i=1}^{d} n_i^{d−i+1}`; for `d = 2` this is `ln(n_1² n)`.
pub fn log_argument(dims: &LayerDims) -> f64 {
    let d = dims.depth();
    dims.as_slice()[1..]
        .iter()
        .enumerate()
        .map(|(i, &n)| (d - i) as f64 * (n as f64).ln())
        .sum()
}

/// Control parameter of the noise level:
/// `θ_WS = √(kL/N)` for Wishart and `θ_WG = ν√(kL/n)` for Wigner, with `L = log_argument(dims)`.
pub fn control_parameter(dims: &LayerDims, noise: &NoiseModel) -> Result<f64> {
    let kl = dims.latent() as f64 * log_argument(dims);
    match *noise {
        NoiseModel::Wishart { samples, .. } => {
            if samples == 0 {
                return Err(invalid("the sample count N must be at least 1"));
            }
            Ok((kl / samples as f64).sqrt())
        }
        NoiseModel::Wigner { nu } => {
            if !(nu >= 0.0 && nu.is_finite()) {
                return Err(invalid(format!("nu must be nonnegative, got {nu}")));
            }
            Ok(nu * (kl / dims.output() as f64).sqrt())
        }
    }
}

/// Noise model realising control parameter `theta`.
///
/// Wishart uses `N = ⌈kL/θ²⌉`, so the realised θ is at most the target;
/// Wigner uses `ν = θ√(n/(kL))` exactly.
pub fn noise_for_control(
    kind: ModelKind,
    dims: &LayerDims,
    theta: f64,
    sigma: f64,
) -> Result<NoiseModel> {
    let kl = dims.latent() as f64 * log_argument(dims);
    let noise = match kind {
        ModelKind::Wishart => {
            if !(theta > 0.0 && theta.is_finite()) {
                return Err(invalid(format!(
                    "Wishart control parameter must be positive, got {theta}"
                )));
            }
            let samples = (kl / (theta * theta)).ceil();
            if samples > u32::MAX as f64 {
                return Err(invalid(format!(
                    "theta = {theta} needs an impractical N = {samples}"
                )));
            }
            NoiseModel::Wishart {
                sigma,
                samples: (samples as usize).max(1),
            }
        }
        ModelKind::Wigner => {
            if !(theta >= 0.0 && theta.is_finite()) {
                return Err(invalid(format!(
                    "Wigner control parameter must be nonnegative, got {theta}"
                )));
            }
            NoiseModel::Wigner {
                nu: theta * (dims.output() as f64 / kl).sqrt(),
            }
        }
    };
    noise.validate()?;
    Ok(noise)
}

/// Noise bound `ω`:
/// Wishart `(‖y⋆‖² + σ²)·max(√(113kL₃/N), 52kL₃/N)`, Wigner `ν√(30kL₃/n)`,
/// with `L₃ = ln 3 + log_argument(dims)`.
pub fn omega_bound(dims: &LayerDims, noise: &NoiseModel, y_star_norm: f64) -> Result<f64> {
    noise.validate()?;
    if !(y_star_norm >= 0.0 && y_star_norm.is_finite()) {
        return Err(invalid(format!(
            "‖y⋆‖ must be nonnegative, got {y_star_norm}"
        )));
    }
    let kl3 = dims.latent() as f64 * (3f64.ln() + log_argument(dims));
    Ok(match *noise {
        NoiseModel::Wishart { sigma, samples } => {
            let r = kl3 / samples as f64;
            (y_star_norm.powi(2) + sigma * sigma) * (113.0 * r).sqrt().max(52.0 * r)
        }
        NoiseModel::Wigner { nu } => nu * (30.0 * kl3 / dims.output() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dense_m(inst: &WishartInstance) -> Array2<f64> {
        let y = inst.sample_matrix().unwrap();
        let mut m = y.t().dot(y) / inst.samples() as f64;
        for i in 0..m.nrows() {
            m[[i, i]] -= inst.sigma() * inst.sigma();
        }
        m
    }

    #[test]
    fn single_row_example() {
        let inst = WishartInstance::from_samples(array![[1.0, 0.0, 0.0]], 1.0).unwrap();
        let mv = m_matvec(&inst, array![1.0, 0.0, 0.0].view()).unwrap();
        assert_eq!(mv, Array1::<f64>::zeros(3));
    }

    #[test]
    fn one_sample_reconstructs_from_stream() {
        let y_star = array![0.5, -1.0, 2.0];
        let inst = sample_wishart(y_star.view(), 0.3, 1, 11).unwrap();
        let mut s = rng::stream(11);
        let u = rng::normal(&mut s);
        let z = rng::normal_vec(&mut s, 3);
        let expected = &y_star * u + &z * 0.3;
        assert_eq!(inst.sample_matrix().unwrap().row(0), expected);
    }

    #[test]
    fn invalid_parameters() {
        let y = array![1.0, 2.0];
        assert!(matches!(
            sample_wishart(y.view(), 1.0, 0, 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(sample_wishart(y.view(), 0.0, 3, 0).is_err());
        assert!(sample_wigner(y.view(), -1.0, 0).is_err());
        assert!(WignerInstance::from_matrix(array![[1.0, 2.0], [2.5, 1.0]], 0.0).is_err());
        assert!(m_matvec(&RankOneTarget::new(y), array![1.0].view()).is_err());
    }

    #[test]
    fn noiseless_wigner_is_outer_product() {
        let y = array![1.0, -2.0, 0.5];
        let inst = sample_wigner(y.view(), 0.0, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(inst.matrix()[[i, j]], y[i] * y[j]);
            }
        }
        let v = array![0.1, 0.2, 0.3];
        let mv = m_matvec(&inst, v.view()).unwrap();
        let expected = &y * y.dot(&v);
        assert!((&mv - &expected).iter().all(|e| e.abs() < 1e-15));
        assert!((inst.frobenius_sq() - y.dot(&y).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn wishart_frobenius_matches_dense_for_both_gram_shapes() {
        let y_star = array![1.0, -0.5, 0.25, 2.0, 0.0, 1.5];
        for samples in [3, 40] {
            let inst = sample_wishart(y_star.view(), 0.7, samples, 5).unwrap();
            let dense = frobenius_sq(dense_m(&inst).view());
            assert!((inst.frobenius_sq() - dense).abs() <= 1e-10 * dense);
            let tr = dense_m(&inst).diag().sum() + 6.0 * 0.49;
            assert!((inst.trace_covariance() - tr).abs() <= 1e-10 * tr);
        }
    }

    #[test]
    fn covariance_representation_agrees_with_samples() {
        let y_star = array![1.0, -0.5, 0.25, 2.0];
        let raw = sample_wishart(y_star.view(), 0.5, 20, 9).unwrap();
        let cov = WishartInstance::from_covariance(raw.covariance(), 0.5, 20).unwrap();
        let v = array![0.3, 0.1, -0.7, 0.2];
        let a = raw.apply(v.view());
        let b = cov.apply(v.view());
        assert!((&a - &b).iter().all(|e| e.abs() < 1e-12));
        assert!((raw.frobenius_sq() - cov.frobenius_sq()).abs() < 1e-10 * raw.frobenius_sq());
    }

    #[test]
    fn bartlett_path_is_symmetric_and_reproducible() {
        let y_star = array![1.0, 0.0, -1.0];
        let a =
            sample_wishart_covariance(y_star.view(), 1.0, 50, 4, Execution::Sequential).unwrap();
        let b = sample_wishart_covariance(y_star.view(), 1.0, 50, 4, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let c = a.covariance();
        assert_eq!(c, c.t());
        assert!(a.sample_matrix().is_none());
    }

    #[test]
    fn control_parameter_examples() {
        let dims = LayerDims::new(vec![10, 250, 1700]).unwrap();
        let l = (250f64 * 250.0 * 1700.0).ln();
        assert!((log_argument(&dims) - l).abs() < 1e-12);

        // N = kL realises θ = 1 exactly when the real-valued N is used.
        let theta = (10.0 * l / (10.0 * l)).sqrt();
        assert_eq!(theta, 1.0);
        let n_ceil = (10.0 * l).ceil() as usize;
        let t = control_parameter(
            &dims,
            &NoiseModel::Wishart {
                sigma: 1.0,
                samples: n_ceil,
            },
        )
        .unwrap();
        assert!(t <= 1.0 && t > 0.997);

        assert_eq!(
            control_parameter(&dims, &NoiseModel::Wigner { nu: 0.0 }).unwrap(),
            0.0
        );

        let dims30 = LayerDims::new(vec![30, 250, 1700]).unwrap();
        let noise = NoiseModel::Wishart {
            sigma: 1.0,
            samples: 5000,
        };
        let ratio =
            control_parameter(&dims30, &noise).unwrap() / control_parameter(&dims, &noise).unwrap();
        assert!((ratio - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn control_parameter_round_trips() {
        let dims = LayerDims::new(vec![10, 250, 1700]).unwrap();
        for theta in [0.05, 0.1, 0.4, 1.0] {
            let nu = noise_for_control(ModelKind::Wigner, &dims, theta, 1.0).unwrap();
            assert!((control_parameter(&dims, &nu).unwrap() - theta).abs() < 1e-12);
            let ws = noise_for_control(ModelKind::Wishart, &dims, theta, 1.0).unwrap();
            let realised = control_parameter(&dims, &ws).unwrap();
            assert!(realised <= theta && realised > theta * 0.99);
        }
        assert!(noise_for_control(ModelKind::Wishart, &dims, 0.0, 1.0).is_err());
        assert!(noise_for_control(ModelKind::Wigner, &dims, 0.0, 1.0).is_ok());
    }

    #[test]
    fn omega_limits() {
        let dims = LayerDims::new(vec![10, 250, 1700]).unwrap();
        assert_eq!(
            omega_bound(&dims, &NoiseModel::Wigner { nu: 0.0 }, 1.0).unwrap(),
            0.0
        );
        let mut last = f64::INFINITY;
        for samples in [10, 100, 1_000, 10_000, 100_000, 10_000_000] {
            let w = omega_bound(
                &dims,
                &NoiseModel::Wishart {
                    sigma: 1.0,
                    samples,
                },
                1.0,
            )
            .unwrap();
            assert!(w < last);
            last = w;
        }
        assert!(last < 0.1);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let y = array![1.0, 2.0, -0.5];
        let w = sample_wishart(y.view(), 0.5, 7, 1).unwrap();
        w.save(dir.path().join("w.bin")).unwrap();
        assert_eq!(WishartInstance::load(dir.path().join("w.bin")).unwrap(), w);
        let c = sample_wishart_covariance(y.view(), 0.5, 70, 1, Execution::Sequential).unwrap();
        c.save(dir.path().join("c.bin")).unwrap();
        assert_eq!(WishartInstance::load(dir.path().join("c.bin")).unwrap(), c);
        let g = sample_wigner(y.view(), 0.3, 2).unwrap();
        g.save(dir.path().join("g.bin")).unwrap();
        assert_eq!(WignerInstance::load(dir.path().join("g.bin")).unwrap(), g);
        assert!(WignerInstance::load(dir.path().join("w.bin")).is_err());
    }
}
