//! # xsde
//!
//! Solver library for linear, non-autonomous, time-delayed stochastic
//! differential systems
//!
//! ```text
//! dX = (A (X * g) + I) dt + Sigma dB,     X on t <= 0 given by zeta_0,
//! ```
//!
//! where A is an n x n space operator and g a causal finite delay measure.
//! Writing A = -l Id + W, the solution on [0, tau] has the series form
//!
//! ```text
//! X = sum over k >= 0 of W^k (zeta_0(0) delta_0 + I + A (zeta_0 * g) + Sigma dB) U V^k
//! ```
//!
//! with causal time-convolution operators U and V whose transfer functions
//! are 1/(l g_hat + 2 i pi xi) and g_hat/(l g_hat + 2 i pi xi). The series
//! converges geometrically at rate lambda = ||W|| / inf_xi |l + 2 i pi xi /
//! g_hat(xi)| when lambda < 1.
//!
//! The crate provides:
//!
//! - [`kernels`]: delay measures, transforms, history convolution;
//! - [`spectral`]: the contraction ratio, shift search, feasibility atlases;
//! - [`timeops`]: U and V as Toeplitz kernels applied through FFT convolution;
//! - [`solver`]: the truncated expansion and an Euler-Maruyama reference;
//! - [`learning`]: the Hebbian-network equilibrium connectivity application;
//! - [`config`], [`commands`], [`output`]: the `xsde` CLI harness.

pub mod commands;
pub mod config;
mod error;
mod fft;
pub mod kernels;
pub mod learning;
mod linalg;
pub mod output;
pub mod solver;
pub mod spectral;
pub mod timeops;

pub use error::{Error, Result};
pub use kernels::{convolve_history, Atom, DelayKernel, ExpTerm, HistoryFunction};
pub use solver::{
    assemble_forcing, euler_maruyama, expand, field_l2, residual, sample_brownian, BrownianPath,
    ExpansionConfig, ForcingField, InputSignal, Problem, SolutionField,
};
pub use spectral::{
    contraction_ratio, default_l_candidates, domain_scan, operator_norm, per_mode_ratios,
    search_l, SpaceOperator, SpectralReport,
};
pub use timeops::{
    apply, apply_atomic, apply_increments, closed_form_exp, closed_form_ou, sample_kernel_ifft,
    sample_operators, KernelLabel, TimeGrid, TimeOperators, ToeplitzKernel,
};
