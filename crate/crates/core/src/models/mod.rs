//! Classifiers sharing one contract: `predict_proba` gives P(y = 1) per row and
//! `predict` thresholds it at 0.5.
//!
//! Classical models (logistic regression, random forest, gradient boosting) and
//! pure quantum models (VQE classifier, QNN, QSVM) live here; sequence models are
//! in [`crate::hybrid`].

mod adam;
mod boosting;
mod forest;
mod logistic;
mod qsvm;
mod standardize;
mod tree;
mod vqc;

pub use adam::Adam;
pub use boosting::{BoostConfig, GradientBoosting};
pub use forest::{ForestConfig, RandomForest};
pub use logistic::{LogisticRegression, LogitConfig};
pub use qsvm::{smo_solve, DualSolution, Qsvm, QsvmConfig};
pub use standardize::Standardizer;
pub use tree::{Criterion, Node, Tree, TreeParams};
pub use vqc::{QnnModel, VqcConfig, VqeModel};

use thiserror::Error;

use crate::qsim::QsimError;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("non-finite value in training input at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("training labels contain a single class")]
    SingleClassTraining,
    #[error("empty training set")]
    EmptyTraining,
    #[error("row {row} has {got} features, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, got: usize },
    #[error("kernel matrix is not positive semi-definite (shifted Cholesky failed at pivot {0})")]
    NonPsdKernel(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Shared prediction contract.
pub trait Classifier: Send + Sync {
    /// P(y = 1) for each row.
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<f64>;

    fn predict(&self, x: &[Vec<f64>]) -> Vec<u8> {
        self.predict_proba(x).iter().map(|&p| (p >= 0.5) as u8).collect()
    }
}

/// Validates a training set: non-empty, rectangular, finite, both classes present.
pub fn check_training(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() || x.len() != y.len() {
        return Err(ModelError::EmptyTraining);
    }
    let d = x[0].len();
    for (row, r) in x.iter().enumerate() {
        if r.len() != d {
            return Err(ModelError::DimensionMismatch { row, expected: d, got: r.len() });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteInput { row, col });
        }
    }
    let ones = y.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == y.len() {
        return Err(ModelError::SingleClassTraining);
    }
    Ok(d)
}

/// Mean binary cross-entropy.
pub fn mean_log_loss(p: &[f64], y: &[u8]) -> f64 {
    p.iter().zip(y).map(|(&p, &y)| crate::stats::log_loss(p, y as f64)).sum::<f64>() / p.len() as f64
}
