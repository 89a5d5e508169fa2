//! Link prediction with fuzzy graph attention networks.
//!
//! Training negatives are chosen each epoch by fuzzy-rough scoring of a
//! random candidate pool ([`fuzzy`]); node representations come from a stack
//! of multi-head attention blocks with layer normalization and identity
//! residuals ([`model`]), differentiated by a small reverse-mode tape
//! ([`autodiff`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the usual choice of `f64`.

pub mod autodiff;
pub mod checkpoint;
pub mod error;
pub mod experiment;
pub mod fuzzy;
pub mod gradcheck;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod synth;
pub mod train;

pub use autodiff::{AdamConfig, AdamState, Tape, Tensor, Var};
pub use error::{FgatError, Result};
pub use fuzzy::{Bandwidth, DecisionClass, FnsConfig, FuzzyRelationConfig, Kernel, ScoringContext, SimilarityMatrix};
pub use graph::{EdgeSplit, Graph, MessageEdges, SplitRatios};
pub use metrics::MetricsReport;
pub use model::{FgatModel, FgatParams, ModelConfig};
pub use scalar::Scalar;
pub use train::{SamplingMode, TrainConfig, TrainingData};

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Tape64 = Tape<f64>;
pub type Tape32 = Tape<f32>;
pub type Model64 = FgatModel<f64>;
pub type Model32 = FgatModel<f32>;
pub type Similarity64 = SimilarityMatrix<f64>;
pub type Checkpoint64 = checkpoint::Checkpoint<f64>;
