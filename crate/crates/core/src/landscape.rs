//! Closed-form landscape quantities and empirical WDC / concentration checks.
//!
//! Expected quantities (`h̃`, `h_x`, `f_E`) are in the `N(0, 1/n_i)` weight
//! scale. For nets sampled with gain `c` multiply them by `c^{2d}`
//! ([`VarianceMode::quartic_factor`]).

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::exec::Execution;
use crate::generator::{GenerativeNetwork, VarianceMode};
use crate::linalg::{norm, spectral_norm};
use crate::objective::{gradient, loss};
use crate::rng;
use crate::spiked::RankOneTarget;

/// `g(θ) = arccos(((π−θ)cos θ + sin θ)/π)`.
pub fn angle_contraction(theta: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(invalid(format!("angle must lie in [0, π], got {theta}")));
    }
    Ok(contract(theta))
}

fn contract(theta: f64) -> f64 {
    (((PI - theta) * theta.cos() + theta.sin()) / PI)
        .clamp(-1.0, 1.0)
        .acos()
}

/// Angle between two nonzero vectors, `2·atan2(‖â−b̂‖, ‖â+b̂‖)`, accurate near 0 and π.
pub fn angle_between(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    check_len("angle operand", a.len(), b.len())?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(invalid("angle with a zero vector is undefined"));
    }
    let ua = &a / na;
    let ub = &b / nb;
    Ok(2.0 * norm((&ua - &ub).view()).atan2(norm((&ua + &ub).view())))
}

/// `θ_0, g(θ_0), …, g^d(θ_0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSequence {
    pub theta: Vec<f64>,
}

pub fn angle_sequence(theta0: f64, depth: usize) -> Result<AngleSequence> {
    angle_contraction(theta0)?;
    let mut theta = Vec::with_capacity(depth + 1);
    theta.push(theta0);
    for i in 0..depth {
        theta.push(contract(theta[i]));
    }
    Ok(AngleSequence { theta })
}

/// `ξ = Π_{i<d} (π−θ_i)/π` and `ζ = Σ_{i<d} (sin θ_i/π) Π_{i<j<d} (π−θ_j)/π`.
pub fn xi_zeta(theta0: f64, depth: usize) -> Result<(f64, f64)> {
    if depth == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    let seq = angle_sequence(theta0, depth)?;
    let theta = &seq.theta[..depth];
    let xi = theta.iter().map(|t| (PI - t) / PI).product();
    // Horner-style: ζ_{i} = sin θ_i/π + ... accumulated from the last layer back.
    let mut zeta = 0.0;
    let mut tail = 1.0;
    for t in theta.iter().rev() {
        zeta += t.sin() / PI * tail;
        tail *= (PI - t) / PI;
    }
    Ok((xi, zeta))
}

/// `ρ_d`, the relative distance from the origin of the spurious critical point `−ρ_d x⋆`.
pub fn rho(depth: usize) -> Result<f64> {
    if depth < 2 {
        return Err(invalid(format!(
            "rho is defined for depth ≥ 2, got {depth}"
        )));
    }
    let mut angles = Vec::with_capacity(depth);
    let mut t = PI;
    for _ in 0..depth {
        angles.push(t);
        t = contract(t);
    }
    Ok((0..depth)
        .map(|i| {
            angles[i].sin() / PI
                * angles[i + 1..]
                    .iter()
                    .map(|a| (PI - a) / PI)
                    .product::<f64>()
        })
        .sum())
}

fn check_pair(x: ArrayView1<f64>, x_star: ArrayView1<f64>) -> Result<()> {
    check_len("x and x_star", x_star.len(), x.len())?;
    if norm(x_star) == 0.0 {
        return Err(invalid("x_star must be nonzero"));
    }
    Ok(())
}

/// `h̃ = 2^{-d}(ξ x⋆ + ζ‖x⋆‖ x̂)` with `(ξ, ζ)` at `∠(x, x⋆)`.
pub fn tilde_h(x: ArrayView1<f64>, x_star: ArrayView1<f64>, depth: usize) -> Result<Array1<f64>> {
    check_pair(x, x_star)?;
    let theta = angle_between(x, x_star)?;
    let (xi, zeta) = xi_zeta(theta, depth)?;
    let mut out = &x_star * xi;
    out.scaled_add(zeta * norm(x_star) / norm(x), &x);
    Ok(out / 2f64.powi(depth as i32))
}

/// `h_x = 4^{-d}‖x‖² x − ⟨h̃, x⟩ h̃`; continuous at `x = 0`, where it vanishes.
pub fn h_field(x: ArrayView1<f64>, x_star: ArrayView1<f64>, depth: usize) -> Result<Array1<f64>> {
    check_pair(x, x_star)?;
    if norm(x) == 0.0 {
        return Ok(Array1::zeros(x.len()));
    }
    let th = tilde_h(x, x_star, depth)?;
    let mut out = &x * (x.dot(&x) / 4f64.powi(depth as i32));
    out.scaled_add(-th.dot(&x), &th);
    Ok(out)
}

/// `f_E = ¼(4^{-d}‖x‖⁴ + 4^{-d}‖x⋆‖⁴ − 2⟨x, h̃⟩²)`; at `x = 0` this is `‖x⋆‖⁴/(4·4^d)`.
pub fn f_expected(x: ArrayView1<f64>, x_star: ArrayView1<f64>, depth: usize) -> Result<f64> {
    check_pair(x, x_star)?;
    let q = 4f64.powi(depth as i32);
    let base = (x.dot(&x).powi(2) + x_star.dot(&x_star).powi(2)) / q;
    if norm(x) == 0.0 {
        return Ok(0.25 * base);
    }
    let overlap = tilde_h(x, x_star, depth)?.dot(&x);
    Ok(0.25 * (base - 2.0 * overlap * overlap))
}

/// `Q = (π−θ)/(2π)·I + sin θ/(2π)·M`, where `M` swaps `x̂1` and `x̂2` and
/// vanishes on the orthogonal complement of their span.
pub fn wdc_expected_gram(x1: ArrayView1<f64>, x2: ArrayView1<f64>) -> Result<Array2<f64>> {
    let theta = angle_between(x1, x2)?;
    let k = x1.len();
    let mut q = Array2::eye(k) * ((PI - theta) / (2.0 * PI));
    let s = theta.sin() / (2.0 * PI);
    if s != 0.0 {
        q += &(swap_matrix(x1, x2) * s);
    }
    Ok(q)
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

/// `e₊e₊ᵀ − e₋e₋ᵀ` with `e± ∝ x̂1 ± x̂2`; `±x̂x̂ᵀ` in the collinear cases.
fn swap_matrix(x1: ArrayView1<f64>, x2: ArrayView1<f64>) -> Array2<f64> {
    let a = &x1 / norm(x1);
    let b = &x2 / norm(x2);
    let plus = &a + &b;
    let minus = &a - &b;
    let (np, nm) = (norm(plus.view()), norm(minus.view()));
    const COLLINEAR: f64 = 1e-12;
    if nm <= COLLINEAR {
        return outer(&a, &a);
    }
    if np <= COLLINEAR {
        return -outer(&a, &a);
    }
    let ep = plus / np;
    let em = minus / nm;
    outer(&ep, &ep) - outer(&em, &em)
}

/// `‖W_{+,x1}ᵀ W_{+,x2} − Q_{x1,x2}‖₂` for one pair.
pub fn wdc_pair_deviation(
    w: ArrayView2<f64>,
    x1: ArrayView1<f64>,
    x2: ArrayView1<f64>,
    seed: u64,
) -> Result<f64> {
    check_len("WDC input", w.ncols(), x1.len())?;
    check_len("WDC input", w.ncols(), x2.len())?;
    let z1 = w.dot(&x1);
    let z2 = w.dot(&x2);
    let both: Vec<usize> = (0..w.nrows())
        .filter(|&j| z1[j] > 0.0 && z2[j] > 0.0)
        .collect();
    let active = w.select(Axis(0), &both);
    let cross = active.t().dot(&active);
    let dev = cross - wdc_expected_gram(x1, x2)?;
    Ok(spectral_norm(dev.view(), seed, 1e-8, 500).value)
}

/// Per-pair WDC deviations over `num_pairs` uniform unit pairs; pair `i` draws
/// from the substream `derive_seed(seed, [i])`.
pub fn wdc_deviations(
    w: ArrayView2<f64>,
    num_pairs: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    if num_pairs == 0 {
        return Err(invalid("num_pairs must be at least 1"));
    }
    let k = w.ncols();
    exec.map_indexed(num_pairs, |i| {
        let s = rng::derive_seed(seed, &[i as u64]);
        let mut stream = rng::stream(s);
        let x1 = rng::unit_vector(&mut stream, k);
        let x2 = rng::unit_vector(&mut stream, k);
        wdc_pair_deviation(w, x1.view(), x2.view(), rng::mix64(s))
    })
    .into_iter()
    .collect()
}

/// Largest sampled WDC deviation: a lower bound on the WDC constant of `w`.
pub fn wdc_deviation(
    w: ArrayView2<f64>,
    num_pairs: usize,
    seed: u64,
    exec: Execution,
) -> Result<f64> {
    Ok(wdc_deviations(w, num_pairs, seed, exec)?
        .into_iter()
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    pub r_plus: f64,
    pub r_minus: f64,
}

fn check_radius_inputs(epsilon: f64, omega: f64, x_star_norm: f64, depth: usize) -> Result<()> {
    for (name, v) in [("epsilon", epsilon), ("omega", omega)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be nonnegative, got {v}")));
        }
    }
    if !(x_star_norm > 0.0 && x_star_norm.is_finite()) {
        return Err(invalid(format!("‖x⋆‖ must be positive, got {x_star_norm}")));
    }
    if depth == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    Ok(())
}

/// Radii of the balls around `x⋆` and `−ρ_d x⋆` from the random-network theorem:
/// `r₊ = K3(d¹⁴√ε + 2^d d¹⁰ ω/‖x⋆‖²)‖x⋆‖`, `r₋ = K4(d¹² ε^¼ + 2^{d/2} d¹⁰ √ω/‖x⋆‖)‖x⋆‖`.
pub fn radii(
    epsilon: f64,
    omega: f64,
    x_star_norm: f64,
    depth: usize,
    k3: f64,
    k4: f64,
) -> Result<Radii> {
    check_radius_inputs(epsilon, omega, x_star_norm, depth)?;
    let d = depth as f64;
    let r_plus = k3
        * (d.powi(14) * epsilon.sqrt()
            + 2f64.powi(depth as i32) * d.powi(10) * omega / x_star_norm.powi(2))
        * x_star_norm;
    let r_minus = k4
        * (d.powi(12) * epsilon.powf(0.25)
            + 2f64.powf(d / 2.0) * d.powi(10) * omega.sqrt() / x_star_norm)
        * x_star_norm;
    Ok(Radii { r_plus, r_minus })
}

/// Radii from the deterministic-network theorem:
/// `r₊ = K3(d⁴√ε + 2^d ω/‖x⋆‖²) d¹⁰‖x⋆‖`, `r₋ = K4(d² ε^¼ + 2^{d/2} √ω/‖x⋆‖) d¹⁰‖x⋆‖`.
pub fn radii_deterministic(
    epsilon: f64,
    omega: f64,
    x_star_norm: f64,
    depth: usize,
    k3: f64,
    k4: f64,
) -> Result<Radii> {
    check_radius_inputs(epsilon, omega, x_star_norm, depth)?;
    let d = depth as f64;
    let d10 = d.powi(10);
    let r_plus = k3
        * (d.powi(4) * epsilon.sqrt() + 2f64.powi(depth as i32) * omega / x_star_norm.powi(2))
        * d10
        * x_star_norm;
    let r_minus = k4
        * (d * d * epsilon.powf(0.25) + 2f64.powf(d / 2.0) * omega.sqrt() / x_star_norm)
        * d10
        * x_star_norm;
    Ok(Radii { r_plus, r_minus })
}

/// Observed versus predicted concentration of the noiseless gradient and loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub epsilon: f64,
    /// `‖∇f₀(x) − h_x‖`.
    pub grad_deviation: f64,
    /// `86 d⁴ √ε / 4^d · max(‖x⋆‖², ‖x‖²) ‖x‖`.
    pub lemma2_bound: f64,
    pub grad_ratio: f64,
    /// `|f₀(x) − f_E(x)|`.
    #[serde(rename = "fE_deviation")]
    pub fe_deviation: f64,
    /// `16 / 4^d · (‖x‖⁴ + ‖x⋆‖⁴) d⁴ √ε`.
    pub lemma6_bound: f64,
    pub fe_ratio: f64,
}

/// Compares the noiseless loss `f₀(x) = ¼‖G(x)G(x)ᵀ − G(x⋆)G(x⋆)ᵀ‖²_F` and its
/// gradient with `f_E` and `h_x`. Expectations and bounds are rescaled by
/// `gain^{2d}` for nets not in the theory scale.
pub fn concentration_report(
    net: &GenerativeNetwork,
    x: ArrayView1<f64>,
    x_star: ArrayView1<f64>,
    epsilon: f64,
) -> Result<ConcentrationReport> {
    check_pair(x, x_star)?;
    check_len("latent point", net.latent_dim(), x.len())?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    let depth = net.depth();
    let scale = net.variance_mode().quartic_factor(depth);
    let target = RankOneTarget::new(net.forward(x_star)?);

    let grad = gradient(net, &target, x)?;
    let expected_grad = h_field(x, x_star, depth)? * scale;
    let grad_deviation = norm((&grad - &expected_grad).view());

    let f0 = loss(net, &target, x, true)?.value;
    let fe_deviation = (f0 - scale * f_expected(x, x_star, depth)?).abs();

    let d4 = (depth as f64).powi(4);
    let q = 4f64.powi(depth as i32);
    let (nx, ns) = (norm(x), norm(x_star));
    let lemma2_bound = scale * 86.0 * d4 * epsilon.sqrt() / q * nx.powi(2).max(ns.powi(2)) * nx;
    let lemma6_bound = scale * 16.0 / q * (nx.powi(4) + ns.powi(4)) * d4 * epsilon.sqrt();
    let ratio = |a: f64, b: f64| {
        if b > 0.0 {
            a / b
        } else if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    Ok(ConcentrationReport {
        epsilon,
        grad_deviation,
        lemma2_bound,
        grad_ratio: ratio(grad_deviation, lemma2_bound),
        fe_deviation,
        lemma6_bound,
        fe_ratio: ratio(fe_deviation, lemma6_bound),
    })
}

/// Theoretical quantities at one point, in the weight scale of `variance_mode`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeReport {
    pub depth: usize,
    pub variance_mode: VarianceMode,
    pub rho_d: Option<f64>,
    pub theta_0: f64,
    pub xi: f64,
    pub zeta: f64,
    pub h_x: Vec<f64>,
    pub tilde_h: Vec<f64>,
    #[serde(rename = "f_E")]
    pub f_e: f64,
    pub epsilon_hat: f64,
    pub omega: f64,
    pub k3: f64,
    pub k4: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub theorem_2: Radii,
    pub theorem_4: Radii,
    pub wdc_max_deviation: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct ReportInputs<'a> {
    pub x: ArrayView1<'a, f64>,
    pub x_star: ArrayView1<'a, f64>,
    pub depth: usize,
    pub variance_mode: VarianceMode,
    pub epsilon_hat: f64,
    pub omega: f64,
    pub k3: f64,
    pub k4: f64,
    pub wdc_max_deviation: Option<f64>,
}

impl LandscapeReport {
    pub fn compute(inp: ReportInputs<'_>) -> Result<Self> {
        check_pair(inp.x, inp.x_star)?;
        let d = inp.depth;
        let scale = inp.variance_mode.quartic_factor(d);
        let theta_0 = if norm(inp.x) == 0.0 {
            0.0
        } else {
            angle_between(inp.x, inp.x_star)?
        };
        let (xi, zeta) = xi_zeta(theta_0, d)?;
        let th = if norm(inp.x) == 0.0 {
            Array1::zeros(inp.x.len())
        } else {
            tilde_h(inp.x, inp.x_star, d)?
        };
        let ns = norm(inp.x_star);
        let theorem_2 = radii(inp.epsilon_hat, inp.omega, ns, d, inp.k3, inp.k4)?;
        let theorem_4 = radii_deterministic(inp.epsilon_hat, inp.omega, ns, d, inp.k3, inp.k4)?;
        Ok(Self {
            depth: d,
            variance_mode: inp.variance_mode,
            rho_d: if d >= 2 { Some(rho(d)?) } else { None },
            theta_0,
            xi,
            zeta,
            h_x: (h_field(inp.x, inp.x_star, d)? * scale).to_vec(),
            tilde_h: (th * scale.sqrt()).to_vec(),
            f_e: scale * f_expected(inp.x, inp.x_star, d)?,
            epsilon_hat: inp.epsilon_hat,
            omega: inp.omega,
            k3: inp.k3,
            k4: inp.k4,
            r_plus: theorem_2.r_plus,
            r_minus: theorem_2.r_minus,
            theorem_2,
            theorem_4,
            wdc_max_deviation: inp.wdc_max_deviation,
        })
    }
}
