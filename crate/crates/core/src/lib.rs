//! Detection and clustering of influential action sequences in paired
//! action/observation time series.
//!
//! The pipeline, end to end:
//!
//! 1. [`data`] — normalized trajectories, fixed-length windows, and masking
//!    of a span of past actions.
//! 2. [`mlp`] — a small Gaussian-emission perceptron trained by negative
//!    log-likelihood on a random mixture of masked and unmasked windows, so
//!    one model predicts under both information conditions.
//! 3. [`te`] — per-step transfer entropy as the entropy gap between the
//!    masked and the unmasked prediction, zero-phase low-pass smoothing, and
//!    positive-local-maximum peak extraction with distance/prominence
//!    pruning.
//! 4. [`cluster`] — K-means over the extracted action windows under dynamic
//!    time warping, with barycenter-averaged centroids.
//! 5. [`sim`] — a synthetic interaction generator with planted, lagged
//!    causal influence, used as ground truth for end-to-end validation.
//!
//! All numeric code is generic over the [`Real`] scalar (`f32` or `f64`);
//! the `*64` aliases below cover the common case.

pub mod cluster;
pub mod data;
pub mod error;
pub mod io;
pub mod mlp;
pub mod scalar;
pub mod sim;
pub mod te;

pub use error::{Error, Result};
pub use scalar::{real, Real};

pub type Trajectory64 = data::Trajectory<f64>;
pub type WindowSample64 = data::WindowSample<f64>;
pub type MaskSpec64 = data::MaskSpec<f64>;
pub type GaussianPrediction64 = mlp::GaussianPrediction<f64>;
pub type MlpModel64 = mlp::MlpModel<f64>;
pub type TeSeries64 = te::TeSeries<f64>;
pub type TePeak64 = te::TePeak<f64>;
pub type ActionSequence64 = cluster::ActionSequence<f64>;
pub type ClusterResult64 = cluster::ClusterResult<f64>;
