//! Multi-fidelity Gaussian process regression with moment-matched effective
//! kernels.
//!
//! Plentiful low-fidelity observations are fused into a closed-form,
//! data-dependent covariance function; a single exact GP carrying that
//! effective kernel is then trained on the sparse high-fidelity data. The
//! crate provides the exact-GP machinery, the effective kernels and their
//! Monte-Carlo verification oracle, sequential and joint hyperparameter
//! training, a three-fidelity recursion, AR1 and vanilla-GP baselines, and
//! the benchmark dataset generators.
//!
//! All numerical code is generic over the scalar type via [`num::Real`]
//! (`f32` or `f64`); the `*64` aliases below are the common entry points.

pub mod baselines;
pub mod bench;
pub mod composition;
pub mod data;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod moment_matching;
pub mod multilevel;
pub mod num;
pub mod optim;
pub mod rng;
pub mod train;

pub use error::{GpError, Result};

/// f64 dense matrix.
pub type Matrix64 = linalg::Matrix<f64>;
/// f32 dense matrix.
pub type Matrix32 = linalg::Matrix<f32>;
/// f64 base kernel.
pub type BaseKernel64 = kernel::BaseKernel<f64>;
/// f64 conditional moments.
pub type ConditionalMoments64 = moment_matching::ConditionalMoments<f64>;
/// f64 posterior prediction.
pub type Prediction64 = gp::Prediction<f64>;
/// f64 multi-fidelity dataset.
pub type FidelityDataset64 = data::FidelityDataset<f64>;
/// f64 training configuration.
pub type TrainConfig64 = train::TrainConfig<f64>;
/// f64 training result.
pub type TrainResult64 = train::TrainResult<f64>;
