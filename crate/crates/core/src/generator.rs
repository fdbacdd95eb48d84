//! Expansive Gaussian ReLU generative networks.
//!
//! A network `G(x) = relu(W_d ... relu(W_1 x))` is piecewise linear: on the
//! region containing `x` it acts as the matrix `Λ_x = Π W_{i,+,x}` where
//! `W_{i,+,x}` keeps only the rows of `W_i` whose pre-activation is strictly
//! positive. `Λ_x` is only ever applied through [`GenerativeNetwork::lambda_matvec`]
//! and [`GenerativeNetwork::lambda_rmatvec`]; the `n × k` product is never formed.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::container::{Container, ContainerKind};
use crate::error::{check_len, invalid, Error, Result};
use crate::rng;

/// Layer widths `[n_0 = k, n_1, ..., n_d = n]` of an expansive network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LayerDims(Vec<usize>);

impl LayerDims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least an input and an output width, got {dims:?}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArchitecture(format!(
                "zero-width layer in {dims:?}"
            )));
        }
        if let Some(w) = dims.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArchitecture(format!(
                "widths must strictly increase, found {} -> {} in {dims:?}",
                w[0], w[1]
            )));
        }
        Ok(Self(dims))
    }

    /// Latent dimension `k`.
    pub fn latent(&self) -> usize {
        self.0[0]
    }

    /// Output dimension `n`.
    pub fn output(&self) -> usize {
        self.0[self.0.len() - 1]
    }

    /// Number of layers `d`.
    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl TryFrom<Vec<usize>> for LayerDims {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LayerDims> for Vec<usize> {
    fn from(d: LayerDims) -> Self {
        d.0
    }
}

/// Weight sampling convention.
///
/// `Theory` draws entries from `N(0, 1/n_i)`; `Experiment` from `N(0, 2/n_i)`,
/// which makes `‖Λ_x‖ ≈ 1` instead of `2^{-d/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    Theory,
    Experiment,
}

impl VarianceMode {
    /// Numerator of the per-entry variance `gain / n_i`.
    pub fn gain(self) -> f64 {
        match self {
            VarianceMode::Theory => 1.0,
            VarianceMode::Experiment => 2.0,
        }
    }

    /// Factor by which quartic quantities (loss, gradient) exceed their
    /// `Theory`-mode expectation at depth `d`: `gain^{2d}`.
    pub fn quartic_factor(self, depth: usize) -> f64 {
        self.gain().powi(2 * depth as i32)
    }

    /// Typical curvature of the loss near the spike, `(gain/2)^{2d}`.
    pub fn curvature_scale(self, depth: usize) -> f64 {
        (self.gain() / 2.0).powi(2 * depth as i32)
    }
}

/// Per-layer activation masks; `masks[i][j]` is true iff the pre-activation of
/// unit `j` in layer `i+1` is strictly positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivationPattern {
    masks: Vec<Vec<bool>>,
}

impl ActivationPattern {
    pub fn new(masks: Vec<Vec<bool>>) -> Self {
        Self { masks }
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    pub fn active_count(&self, layer: usize) -> usize {
        self.masks[layer].iter().filter(|&&m| m).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeNetwork {
    dims: LayerDims,
    weights: Vec<Array2<f64>>,
    variance_mode: VarianceMode,
    seed: Option<u64>,
}

/// Samples a network with i.i.d. Gaussian weights.
///
/// Layer `i` (1-based) is drawn row-major from its own stream seeded with
/// `seed + i`.
pub fn sample_gaussian_network(
    dims: &[usize],
    variance_mode: VarianceMode,
    seed: u64,
) -> Result<GenerativeNetwork> {
    let dims = LayerDims::new(dims.to_vec())?;
    let weights = dims
        .as_slice()
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (n_in, n_out) = (w[0], w[1]);
            let std = (variance_mode.gain() / n_out as f64).sqrt();
            let mut stream = rng::stream(seed.wrapping_add(i as u64 + 1));
            rng::normal_matrix(&mut stream, n_out, n_in, std)
        })
        .collect();
    Ok(GenerativeNetwork {
        dims,
        weights,
        variance_mode,
        seed: Some(seed),
    })
}

impl GenerativeNetwork {
    /// Builds a network from explicit weights; `W_i` must be `n_i × n_{i-1}`.
    pub fn from_weights(weights: Vec<Array2<f64>>, variance_mode: VarianceMode) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArchitecture("no layers".into()));
        }
        let mut dims = vec![weights[0].ncols()];
        for (i, w) in weights.iter().enumerate() {
            if w.ncols() != dims[i] {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {} expects {} inputs but the previous layer has {} outputs",
                    i + 1,
                    w.ncols(),
                    dims[i]
                )));
            }
            dims.push(w.nrows());
        }
        Ok(Self {
            dims: LayerDims::new(dims)?,
            weights,
            variance_mode,
            seed: None,
        })
    }

    pub fn dims(&self) -> &LayerDims {
        &self.dims
    }

    pub fn latent_dim(&self) -> usize {
        self.dims.latent()
    }

    pub fn output_dim(&self) -> usize {
        self.dims.output()
    }

    pub fn depth(&self) -> usize {
        self.dims.depth()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn variance_mode(&self) -> VarianceMode {
        self.variance_mode
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `G(x)`.
    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.forward_with_pattern(x)?.0)
    }

    pub fn activation_pattern(&self, x: ArrayView1<f64>) -> Result<ActivationPattern> {
        Ok(self.forward_with_pattern(x)?.1)
    }

    /// `G(x)` together with the activation pattern of `x`.
    pub fn forward_with_pattern(
        &self,
        x: ArrayView1<f64>,
    ) -> Result<(Array1<f64>, ActivationPattern)> {
        check_len("latent input", self.latent_dim(), x.len())?;
        let mut h = x.to_owned();
        let mut masks = Vec::with_capacity(self.depth());
        for w in &self.weights {
            let mut z = w.dot(&h);
            let mask: Vec<bool> = z.iter().map(|&v| v > 0.0).collect();
            Zip::from(&mut z).and(&mask).for_each(|v, &m| {
                if !m {
                    *v = 0.0;
                }
            });
            masks.push(mask);
            h = z;
        }
        Ok((h, ActivationPattern { masks }))
    }

    /// Pre-activations `W_i h_{i-1}` of every layer at `x`.
    pub fn pre_activations(&self, x: ArrayView1<f64>) -> Result<Vec<Array1<f64>>> {
        check_len("latent input", self.latent_dim(), x.len())?;
        let mut h = x.to_owned();
        let mut out = Vec::with_capacity(self.depth());
        for w in &self.weights {
            let z = w.dot(&h);
            h = z.mapv(|v| v.max(0.0));
            out.push(z);
        }
        Ok(out)
    }

    fn check_pattern(&self, pattern: &ActivationPattern) -> Result<()> {
        check_len(
            "activation pattern depth",
            self.depth(),
            pattern.masks.len(),
        )?;
        for (w, m) in self.weights.iter().zip(&pattern.masks) {
            check_len("activation mask", w.nrows(), m.len())?;
        }
        Ok(())
    }

    /// `Λ_x v` for the linear region described by `pattern`.
    pub fn lambda_matvec(
        &self,
        pattern: &ActivationPattern,
        v: ArrayView1<f64>,
    ) -> Result<Array1<f64>> {
        self.check_pattern(pattern)?;
        check_len("latent vector", self.latent_dim(), v.len())?;
        let mut h = v.to_owned();
        for (w, mask) in self.weights.iter().zip(&pattern.masks) {
            let mut z = w.dot(&h);
            Zip::from(&mut z).and(mask).for_each(|v, &m| {
                if !m {
                    *v = 0.0;
                }
            });
            h = z;
        }
        Ok(h)
    }

    /// `Λ_xᵀ u`, the adjoint of [`Self::lambda_matvec`].
    pub fn lambda_rmatvec(
        &self,
        pattern: &ActivationPattern,
        u: ArrayView1<f64>,
    ) -> Result<Array1<f64>> {
        self.check_pattern(pattern)?;
        check_len("output vector", self.output_dim(), u.len())?;
        let mut h = u.to_owned();
        for (w, mask) in self.weights.iter().zip(&pattern.masks).rev() {
            Zip::from(&mut h).and(mask).for_each(|v, &m| {
                if !m {
                    *v = 0.0;
                }
            });
            h = w.t().dot(&h);
        }
        Ok(h)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let meta = serde_json::json!({
            "dims": self.dims,
            "variance_mode": self.variance_mode,
            "seed": self.seed,
        });
        let arrays = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| (format!("W{}", i + 1), w.clone()))
            .collect();
        Container::new(ContainerKind::Network, meta, arrays).write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let c = Container::read(path)?;
        c.expect_kind(ContainerKind::Network)?;
        let dims: LayerDims = serde_json::from_value(c.meta_field("dims")?)?;
        let variance_mode: VarianceMode = serde_json::from_value(c.meta_field("variance_mode")?)?;
        let seed: Option<u64> = serde_json::from_value(c.meta_field("seed")?)?;
        let mut net = Self::from_weights(c.into_matrices(), variance_mode)?;
        if net.dims != dims {
            return Err(Error::Format(format!(
                "header dims {:?} disagree with weight shapes {:?}",
                dims.as_slice(),
                net.dims.as_slice()
            )));
        }
        net.seed = seed;
        Ok(net)
    }
}

/// Outcome of checking the expansivity inequality layer by layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansivityReport {
    pub satisfied: bool,
    pub epsilon: f64,
    pub c: f64,
    pub log_base: String,
    pub layers: Vec<LayerMargin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMargin {
    /// 1-based index of the wider layer.
    pub layer: usize,
    pub n_in: usize,
    pub n_out: usize,
    /// `c ε⁻² log(1/ε) n_in log n_in`.
    pub required: f64,
    /// `n_out − required`.
    pub margin: f64,
}

/// Evaluates `n_{i+1} ≥ c ε⁻² log(1/ε) n_i log n_i` (natural logarithms) for every layer.
pub fn check_expansivity(dims: &LayerDims, epsilon: f64, c: f64) -> Result<ExpansivityReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("c must be positive, got {c}")));
    }
    let factor = c * epsilon.powi(-2) * (1.0 / epsilon).ln();
    let layers: Vec<LayerMargin> = dims
        .as_slice()
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let n_in = w[0] as f64;
            let required = factor * n_in * n_in.ln();
            LayerMargin {
                layer: i + 1,
                n_in: w[0],
                n_out: w[1],
                required,
                margin: w[1] as f64 - required,
            }
        })
        .collect();
    Ok(ExpansivityReport {
        satisfied: layers.iter().all(|l| l.margin >= 0.0),
        epsilon,
        c,
        log_base: "natural".into(),
        layers,
    })
}
