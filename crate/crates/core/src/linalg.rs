//! Small dense helpers shared by the samplers, the landscape probes and the optimizer.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::exec::Execution;
use crate::rng;

pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Result of a power iteration run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Dominant eigenvalue of a symmetric positive semidefinite operator.
///
/// Stops when the Rayleigh quotient changes by at most `tol` (relative) or
/// after `max_iter` applications. The start vector is drawn from `seed`.
pub fn power_iteration_psd<F>(
    apply: F,
    dim: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> PowerEstimate
where
    F: Fn(ArrayView1<f64>) -> Array1<f64>,
{
    let mut v = rng::unit_vector(&mut rng::stream(seed), dim);
    let mut value = 0.0;
    for it in 1..=max_iter {
        let w = apply(v.view());
        let next = v.dot(&w);
        let wn = norm(w.view());
        if wn == 0.0 {
            return PowerEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        v = w / wn;
        if it > 1 && (next - value).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return PowerEstimate {
                value: next,
                iterations: it,
                converged: true,
            };
        }
        value = next;
    }
    PowerEstimate {
        value,
        iterations: max_iter,
        converged: false,
    }
}

/// Spectral norm of a dense matrix via power iteration on `AᵀA`.
pub fn spectral_norm(a: ArrayView2<f64>, seed: u64, tol: f64, max_iter: usize) -> PowerEstimate {
    let est = power_iteration_psd(|v| a.t().dot(&a.dot(&v)), a.ncols(), seed, tol, max_iter);
    PowerEstimate {
        value: est.value.max(0.0).sqrt(),
        ..est
    }
}

/// Largest algebraic eigenvalue of a symmetric operator.
///
/// Runs power iteration on `A + s·I` where `s` bounds the spectral radius, so
/// the top of the spectrum dominates even when `A` has large negative
/// eigenvalues.
pub fn top_eigenvalue<F>(apply: F, dim: usize, seed: u64, max_iter: usize) -> f64
where
    F: Fn(ArrayView1<f64>) -> Array1<f64>,
{
    let radius = power_iteration_psd(
        |v| {
            let w = apply(v);
            apply(w.view())
        },
        dim,
        seed,
        1e-6,
        max_iter,
    )
    .value
    .max(0.0)
    .sqrt();
    let shifted = power_iteration_psd(
        |v| {
            let mut w = apply(v);
            w.scaled_add(radius, &v);
            w
        },
        dim,
        rng::mix64(seed),
        1e-9,
        max_iter,
    );
    shifted.value - radius
}

/// `XᵀX`, computed in column blocks so each block can run on its own thread.
/// Every output entry is produced by exactly one block, so the result does not
/// depend on the execution mode.
pub fn gram(x: ArrayView2<f64>, exec: Execution) -> Array2<f64> {
    const BLOCK: usize = 128;
    let cols = x.ncols();
    let starts: Vec<usize> = (0..cols).step_by(BLOCK).collect();
    let blocks = exec.map(&starts, |&c0| {
        let c1 = (c0 + BLOCK).min(cols);
        x.t().dot(&x.slice(s![.., c0..c1]))
    });
    let mut out = Array2::zeros((cols, cols));
    for (&c0, block) in starts.iter().zip(blocks) {
        let c1 = c0 + block.ncols();
        out.slice_mut(s![.., c0..c1]).assign(&block);
    }
    out
}

pub fn frobenius_sq(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}
