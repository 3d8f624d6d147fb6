//! Deep-learning models for pavement performance forecasting.
//!
//! This crate implements, from scratch, the three network architectures used
//! to predict next-year pavement condition indicators from PMIS-style
//! section histories: a CNN over the 18x42 encoded feature matrix, a
//! single-layer LSTM over the 18-step indicator sequence, and a hybrid that
//! runs a shared Conv1D over every timestep before the LSTM. Everything is
//! generic over the floating-point scalar (`f32`/`f64`); evaluation and all
//! reference numbers run in `f64`.
//!
//! Module map:
//! - [`tensor`]: dense row-major tensors, matmul, elementwise ops, init.
//! - [`rng`]: seeded, cross-platform deterministic random numbers.
//! - [`layers`]: forward/backward for every layer kind plus gradient checks.
//! - [`model`]: declarative architecture specs, the three builders, losses,
//!   and the versioned binary model container.
//! - [`data`]: indicator/work-type tables, CSV ingestion, feature encoding,
//!   normalization, splitting, and the synthetic section generator.
//! - [`train`]: SGD/Adam, the epoch loop, R² and accuracy metrics.

pub mod data;
pub mod error;
pub mod layers;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Concrete aliases for the default 64-bit configuration used by the CLI
/// and the acceptance experiments.
pub type Tensor64 = tensor::Tensor<f64>;
pub type Model64 = model::Model<f64>;
pub type Dataset64 = data::Dataset<f64>;

/// Single-precision aliases; available but not used by the reference runs.
pub type Tensor32 = tensor::Tensor<f32>;
pub type Model32 = model::Model<f32>;
