//! Window classification: an RBF-kernel SVM, cross-validated hyperparameter
//! search, ranking metrics and a simulator of classifier scores.

mod cv;
mod metrics;
mod sim;
mod svm;

pub use cv::{grid_search_cv, stratified_folds, GridPoint, GridSearchResult, DEFAULT_C_GRID, DEFAULT_GAMMA_GRID};
pub use metrics::{auc, average_precision, roc_curve};
pub use sim::{simulate_window_scores, Gaussian, ScoreSimSpec, DEFAULT_HIT_PROB, DEFAULT_SCORE_SD};
pub use svm::{train_svm, Standardizer, SvmModel, SvmParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training data must contain both classes")]
    SingleClassData,
    #[error("C and gamma must be positive")]
    NonPositiveHyperparameter,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("cannot build {folds} stratified folds: {reason}")]
    DegenerateFolds { folds: usize, reason: String },
    #[error("no positive examples")]
    NoPositives,
    #[error("invalid score simulation spec: {0}")]
    InvalidSpec(String),
    #[error("malformed model file: {0}")]
    Format(String),
}
