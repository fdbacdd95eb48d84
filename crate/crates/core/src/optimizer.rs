//! Two-arm (sub)gradient descent on the quartic loss.
//!
//! Descent runs from `+x̂_0` and `−x̂_0`; the arm with the smaller final loss
//! wins. The constant `‖M‖²_F/4` is left out of every loss value here since it
//! cancels in the comparison.

use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::exec::Execution;
use crate::generator::GenerativeNetwork;
use crate::linalg::{norm, top_eigenvalue};
use crate::objective::{loss_and_gradient, LossValue};
use crate::rng;
use crate::spiked::{GroundTruth, TargetOperator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Fixed step `α`; `None` picks `0.25 / (gain/2)^{2d}`.
    pub step_size: Option<f64>,
    pub max_iters: usize,
    /// Radius of `x̂_0` relative to the estimated `‖x⋆‖`.
    pub init_radius: f64,
    /// Stop once `‖∇f‖ ≤ grad_tol·(1 + (gain/2)^{2d}‖x‖³)`; 0 disables.
    pub grad_tol: f64,
    /// Stop once the best loss improves by at most this relative amount for
    /// `stall_window` consecutive steps; 0 disables.
    pub loss_rel_tol: f64,
    pub stall_window: usize,
    pub seed: u64,
    /// Halve `α` up to 20 times per step until the loss does not increase.
    pub line_search: bool,
    /// Keep every `store_every`-th iterate in the trace (the last is always kept).
    pub store_every: usize,
    /// Record wall-clock time; off by default so outputs are reproducible.
    pub record_timings: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_size: None,
            max_iters: 3000,
            init_radius: 0.1,
            grad_tol: 1e-10,
            loss_rel_tol: 1e-12,
            stall_window: 10,
            seed: 0,
            line_search: false,
            store_every: 10,
            record_timings: false,
        }
    }
}

impl OptimizerConfig {
    /// Plain Algorithm-style iteration: fixed step, no early stopping.
    pub fn literal(step_size: f64, max_iters: usize) -> Self {
        Self {
            step_size: Some(step_size),
            max_iters,
            grad_tol: 0.0,
            loss_rel_tol: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.step_size {
            if !(a > 0.0 && a.is_finite()) {
                return Err(invalid(format!("step size must be positive, got {a}")));
            }
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.init_radius > 0.0 && self.init_radius.is_finite()) {
            return Err(invalid(format!(
                "init_radius must be positive, got {}",
                self.init_radius
            )));
        }
        if !(self.grad_tol >= 0.0 && self.loss_rel_tol >= 0.0) {
            return Err(invalid("tolerances must be nonnegative"));
        }
        if self.stall_window == 0 || self.store_every == 0 {
            return Err(invalid("stall_window and store_every must be at least 1"));
        }
        Ok(())
    }

    /// The step actually used on `net`.
    pub fn resolved_step(&self, net: &GenerativeNetwork) -> f64 {
        self.step_size
            .unwrap_or_else(|| 0.25 / net.variance_mode().curvature_scale(net.depth()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    GradTol,
    LossStall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub arm: Arm,
    /// Iteration index of each stored iterate.
    pub iterate_steps: Vec<usize>,
    pub iterates: Vec<Vec<f64>>,
    /// Loss (constant excluded) at every accepted iterate, starting with `x_0`.
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub x_final: Vec<f64>,
    pub final_loss: f64,
}

/// Gradient iteration `x ← x − α∇f(x)` from `x0`.
pub fn descend<T: TargetOperator + ?Sized>(
    net: &GenerativeNetwork,
    target: &T,
    x0: ArrayView1<f64>,
    config: &OptimizerConfig,
) -> Result<RunTrace> {
    config.validate()?;
    check_len("start point", net.latent_dim(), x0.len())?;
    check_len("target dimension", net.output_dim(), target.dim())?;
    if norm(x0) == 0.0 {
        return Err(Error::InvalidStart);
    }
    let alpha = config.resolved_step(net);
    let curvature = net.variance_mode().curvature_scale(net.depth());

    let mut x = x0.to_owned();
    let (LossValue { value: mut l, .. }, mut g) = loss_and_gradient(net, target, x.view())?;
    let mut trace = RunTrace {
        arm: Arm::Plus,
        iterate_steps: vec![0],
        iterates: vec![x.to_vec()],
        losses: vec![l],
        grad_norms: vec![norm(g.view())],
        iterations: 0,
        stop_reason: StopReason::MaxIters,
        x_final: Vec::new(),
        final_loss: l,
    };
    let mut best = l;
    let mut stalled = 0usize;

    for it in 1..=config.max_iters {
        let gn = norm(g.view());
        if gn <= config.grad_tol * (1.0 + curvature * norm(x.view()).powi(3)) {
            trace.stop_reason = StopReason::GradTol;
            break;
        }

        let mut step = alpha;
        let mut cand = &x - &(&g * step);
        let (mut lc, mut gc) = loss_and_gradient(net, target, cand.view())?;
        if config.line_search {
            let mut halvings = 0;
            while lc.value > l && halvings < 20 {
                step *= 0.5;
                halvings += 1;
                cand = &x - &(&g * step);
                (lc, gc) = loss_and_gradient(net, target, cand.view())?;
            }
            if lc.value > l {
                trace.stop_reason = StopReason::LossStall;
                break;
            }
        }

        x = cand;
        l = lc.value;
        g = gc;
        trace.iterations = it;
        trace.losses.push(l);
        trace.grad_norms.push(norm(g.view()));
        if it % config.store_every == 0 {
            trace.iterate_steps.push(it);
            trace.iterates.push(x.to_vec());
        }
        if !l.is_finite() {
            return Err(invalid(format!(
                "loss diverged at iteration {it}; the step size {alpha} is too large"
            )));
        }

        // Stall on the running best so that a 2-cycle around a kink also stops.
        let gain = (best - l) / best.abs().max(f64::MIN_POSITIVE);
        if l < best {
            best = l;
        }
        if config.loss_rel_tol > 0.0 && gain <= config.loss_rel_tol {
            stalled += 1;
            if stalled >= config.stall_window {
                trace.stop_reason = StopReason::LossStall;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    if trace.iterate_steps.last() != Some(&trace.iterations) {
        trace.iterate_steps.push(trace.iterations);
        trace.iterates.push(x.to_vec());
    }
    trace.final_loss = l;
    trace.x_final = x.to_vec();
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub x_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub final_loss: f64,
    pub chosen_arm: Arm,
    pub plus: RunTrace,
    pub minus: RunTrace,
    pub step_size: f64,
    /// Estimated `‖x⋆‖` used to size `x̂_0`.
    pub init_scale: f64,
    /// `‖G(x̂) − y⋆‖` when the instance carries ground truth.
    pub recon_error: Option<f64>,
    /// `recon_error / ‖y⋆‖`.
    pub relative_error: Option<f64>,
    pub wall_ms: f64,
}

impl RecoveryResult {
    pub fn iterations(&self) -> usize {
        match self.chosen_arm {
            Arm::Plus => self.plus.iterations,
            Arm::Minus => self.minus.iterations,
        }
    }
}

/// Estimate of `‖x⋆‖` from `λ_max(M) ≈ ‖y⋆‖²` and `‖G(x)‖ ≈ (gain/2)^{d/2}‖x‖`.
pub fn latent_scale_estimate<T: TargetOperator + ?Sized>(
    net: &GenerativeNetwork,
    target: &T,
    seed: u64,
) -> f64 {
    let lambda = top_eigenvalue(|v| target.apply(v), target.dim(), seed, 30);
    let y_norm = lambda.max(f64::MIN_POSITIVE).sqrt();
    let gain = net.variance_mode().gain();
    y_norm * (2.0 / gain).powf(net.depth() as f64 / 2.0)
}

/// Runs descent from `±x̂_0` and keeps the arm with the smaller final loss.
pub fn two_arm<T: TargetOperator + ?Sized>(
    net: &GenerativeNetwork,
    target: &T,
    config: &OptimizerConfig,
    exec: Execution,
) -> Result<RecoveryResult> {
    config.validate()?;
    check_len("target dimension", net.output_dim(), target.dim())?;
    let start = Instant::now();
    let init_scale = latent_scale_estimate(net, target, rng::derive_seed(config.seed, &[1]));
    let mut stream = rng::stream(rng::derive_seed(config.seed, &[2]));
    let x0 = rng::unit_vector(&mut stream, net.latent_dim()) * (config.init_radius * init_scale);
    let neg = -&x0;

    let (plus, minus) = exec.join(
        || descend(net, target, x0.view(), config),
        || descend(net, target, neg.view(), config),
    );
    let plus = plus?;
    let mut minus = minus?;
    minus.arm = Arm::Minus;

    let chosen = if plus.final_loss < minus.final_loss {
        &plus
    } else {
        &minus
    };
    let chosen_arm = chosen.arm;
    let final_loss = chosen.final_loss;
    let x_hat = Array1::from(chosen.x_final.clone());
    let y_hat = net.forward(x_hat.view())?;
    let (recon_error, relative_error) = match target.truth() {
        Some(GroundTruth { y_star, .. }) => {
            let err = norm((&y_hat - y_star).view());
            (Some(err), Some(err / norm(y_star.view())))
        }
        None => (None, None),
    };
    Ok(RecoveryResult {
        x_hat: x_hat.to_vec(),
        y_hat: y_hat.to_vec(),
        final_loss,
        chosen_arm,
        plus,
        minus,
        step_size: config.resolved_step(net),
        init_scale,
        recon_error,
        relative_error,
        wall_ms: if config.record_timings {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        },
    })
}

/// `z / ‖G(z)‖`, so that `‖G(x⋆)‖ = 1`.
pub fn normalize_latent(net: &GenerativeNetwork, z: ArrayView1<f64>) -> Result<Array1<f64>> {
    let gz = norm(net.forward(z)?.view());
    if gz == 0.0 {
        return Err(invalid("G(z) = 0; the latent cannot be normalized"));
    }
    Ok(&z / gz)
}

/// Draws `z ~ N(0, I_k)` until `G(z) ≠ 0` and returns the normalized truth.
pub fn sample_truth(net: &GenerativeNetwork, seed: u64) -> Result<GroundTruth> {
    let mut stream = rng::stream(seed);
    for _ in 0..1000 {
        let z = rng::normal_vec(&mut stream, net.latent_dim());
        if let Ok(x_star) = normalize_latent(net, z.view()) {
            let y_star = net.forward(x_star.view())?;
            return Ok(GroundTruth { x_star, y_star });
        }
    }
    Err(invalid("the network maps every sampled latent to zero"))
}
