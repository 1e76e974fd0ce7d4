//! Laboratory for backdoor attacks on graph classifiers: motif census of a
//! dataset, motif-based trigger selection, shadow-model-guided placement,
//! training-set poisoning, victim retraining, attack metrics, and a
//! similarity-pruning defense, plus the experiment harness that drives it
//! all reproducibly.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the default `f64` precision used by the harness and CLI.

pub mod attack;
pub mod baselines;
pub mod census;
pub mod graph;
pub mod harness;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod scalar;
pub mod tu;

pub use scalar::Scalar;

/// Default scalar precision for experiments.
pub type Real = f64;

pub type Graph = graph::Graph<Real>;
pub type Dataset = graph::Dataset<Real>;
pub type AvailableData = graph::AvailableData<Real>;
pub type Matrix = matrix::Matrix<Real>;
pub type GnnModel = nn::GnnModel<Real>;
pub type Prediction = nn::Prediction<Real>;
pub type TrainTarget = nn::TrainTarget<Real>;
pub type Trigger = attack::Trigger<Real>;
pub type MetricsRow = metrics::MetricsRow<Real>;
