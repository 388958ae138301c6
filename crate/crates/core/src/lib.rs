//! Sparse joint transmission for downlink cloud radio access networks with
//! finite-capacity fronthaul links.
//!
//! The crate models how a baseband unit acquires noisy, incomplete, and
//! quantized channel knowledge from its remote radio heads, lifts the
//! sum-spectral-efficiency lower bound into a product of Rayleigh quotients
//! over one network-wide precoding vector, and solves for a group-sparse
//! precoder with a generalized power iteration inside a Lagrange-multiplier
//! bisection. Zero-forcing baselines and a Monte Carlo ergodic
//! spectral-efficiency runner support benchmarking.
//!
//! Modules follow the pipeline:
//! - [`config`]: scenario parameters.
//! - [`net_model`]: topology, path loss, correlated channels, MMSE
//!   estimation, and the BBU's blind view of a realization.
//! - [`fronthaul`]: CSI selection/quantization and precoded-signal
//!   quantization with capacity-driven bit allocation.
//! - [`se_metrics`]: effective noise, the BBU-side SE lower bound, true
//!   SINR, and the ergodic Monte Carlo average.
//! - [`spca_core`]: the lifted matrices, objective, gradient, stationarity
//!   residual, and curvature test.
//! - [`solver`]: zero-forcing initialization, the power iteration, the
//!   multiplier bisection, and the power projection.
//! - [`baselines`]: the RCC-ZF and SC-ZF comparison schemes.
//! - [`strategies`]: strategy adapters for the Monte Carlo runner.

pub mod baselines;
pub mod config;
pub mod error;
pub mod fronthaul;
pub mod linalg;
pub mod net_model;
pub mod se_metrics;
pub mod solver;
pub mod spca_core;
pub mod strategies;

pub use config::NetworkConfig;
pub use error::{Error, Result};
pub use fronthaul::{QuantizationPlan, QuantMode};
pub use linalg::{CMat, CVec};
pub use net_model::{ChannelSet, CsitView, Topology};
pub use se_metrics::{ergodic_se, ErgodicSe, PrecoderStrategy, Realization};
pub use solver::{solve, SolverOptions, SolverResult, SolverStatus, TriState};
pub use spca_core::{LiftedProblem, SecondOrderMode, StackedPrecoder, VTermMode};
