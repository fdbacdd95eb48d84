//! Rank-one spike recovery under expansive Gaussian ReLU generative priors.
//!
//! The crate is organised around the pieces of the recovery pipeline:
//!
//! - [`generator`]: expansive ReLU networks `G(x) = relu(W_d ... relu(W_1 x))`,
//!   their activation patterns and the matrix-free local linearization `Λ_x`.
//! - [`spiked`]: spiked Wishart / Wigner observations and the target operator `M`.
//! - [`objective`]: the quartic loss `¼‖G(x)G(x)ᵀ − M‖²_F` and its a.e. gradient.
//! - [`landscape`]: closed-form landscape quantities (angle contraction, `ρ_d`,
//!   expected gradient field, expected loss, WDC deviations, radii).
//! - [`optimizer`]: the two-arm (sub)gradient method.
//! - [`experiments`]: scaling study, WDC and landscape probes, self-test.
//!
//! Heavy Monte Carlo loops go through [`exec::Execution`], which runs on rayon
//! when the `parallel` feature is enabled and sequentially otherwise.

pub mod container;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod generator;
pub mod landscape;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod rng;
pub mod spiked;

pub use error::{Error, Result};
pub use exec::Execution;
pub use generator::{
    check_expansivity, sample_gaussian_network, ActivationPattern, ExpansivityReport,
    GenerativeNetwork, LayerDims, VarianceMode,
};
pub use objective::{fd_gradient, gradient, loss, LossValue};
pub use optimizer::{descend, two_arm, OptimizerConfig, RecoveryResult, RunTrace};
pub use spiked::{
    control_parameter, m_frobenius_sq, m_matvec, omega_bound, sample_wigner, sample_wishart,
    ModelKind, NoiseModel, SpikedInstance, TargetOperator, WignerInstance, WishartInstance,
};
