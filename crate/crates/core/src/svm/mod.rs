//! One-vs-rest support vector classifiers over the five seats.
//!
//! [`linear`] solves the primal with squared hinge loss and an L2 penalty on
//! the weights (bias unregularized). [`rbf`] solves the C-SVC dual with an RBF
//! kernel by sequential minimal optimization.

pub mod linear;
pub mod rbf;

pub use linear::{train_linear_svc, LinearSvcModel, LinearSvcParams};
pub use rbf::{train_rbf_svc, KernelClass, KernelSvcModel, RbfSvcParams};

use crate::game::NUM_PLAYERS;
use crate::linalg::Matrix;
use crate::model::ModelError;

/// Checks training inputs shared by both solvers.
pub(crate) fn check_training_set(x: &Matrix, y: &[usize]) -> Result<(), ModelError> {
    if x.rows() == 0 {
        return Err(ModelError::EmptyDataset);
    }
    if y.len() != x.rows() {
        return Err(ModelError::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= NUM_PLAYERS) {
        return Err(ModelError::BadLabel(bad));
    }
    Ok(())
}

/// `+1` for rows of `class`, `-1` otherwise.
pub fn one_vs_rest(y: &[usize], class: usize) -> Vec<f64> {
    y.iter()
        .map(|&c| if c == class { 1.0 } else { -1.0 })
        .collect()
}
