//! Learners, metrics and datasets behind the algorithm, data and model
//! holons.

pub mod dataset;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod registry;
pub mod source;
pub mod synthetic;

pub use dataset::{Dataset, TaskKind};
pub use matrix::Matrix;
pub use metrics::Measure;
pub use registry::{Factory, FittedModel, LearnerSpec, Registry, Score};
pub use source::{CsvDescriptor, DataSource};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("learner `{learner}` ({learner_task:?}) cannot train on {data_task:?} data")]
    IncompatibleTask { learner: String, learner_task: TaskKind, data_task: TaskKind },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("model expects {expected} features, data has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("row {row} has {got} values, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("parameter {param}={value}: {reason}")]
    BadParam { param: String, value: String, reason: String },
    #[error("learner `{0}` is already registered")]
    DuplicateLearner(String),
    #[error("no learner named `{0}`")]
    UnknownLearner(String),
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error("dataset `{0}` has no targets")]
    MissingTargets(String),
    #[error("csv row {row}: {reason}")]
    Csv { row: usize, reason: String },
    #[error("{0}")]
    Io(String),
}
