//! RBF-kernel C-SVC solved in the dual by SMO with second-order working-set
//! selection. One binary problem per seat, all sharing one kernel matrix.

use super::{check_training_set, one_vs_rest};
use crate::game::NUM_PLAYERS;
use crate::linalg::{sq_dist, Matrix};
use crate::model::{check_dim, Classifier, FeatureSchema, ModelError, Scores};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const TAU: f64 = 1e-12;

/// Largest training set whose kernel matrix is kept in memory.
const DENSE_KERNEL_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfSvcParams {
    pub c: f64,
    /// `None` selects `1 / (d * variance of all feature entries)`.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RbfSvcParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

/// Dual solution for one seat's binary problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelClass {
    /// Training rows that became support vectors.
    #[serde(default)]
    pub support_indices: Vec<usize>,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub max_kkt_violation: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSvcModel {
    pub feature_schema: FeatureSchema,
    pub classes: Vec<usize>,
    pub c: f64,
    pub gamma: f64,
    pub per_class: Vec<KernelClass>,
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * sq_dist(a, b)).exp()
}

impl KernelClass {
    pub fn decision(&self, gamma: f64, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, coef)| coef * rbf(gamma, sv, x))
            .sum::<f64>()
            + self.bias
    }
}

impl Classifier for KernelSvcModel {
    fn decision_scores(&self, x: &[f64]) -> Result<Scores, ModelError> {
        check_dim(self.feature_schema.dim, x)?;
        let mut scores = [0.0; NUM_PLAYERS];
        for (k, s) in scores.iter_mut().enumerate() {
            *s = self.per_class[k].decision(self.gamma, x);
        }
        Ok(scores)
    }
}

/// `1 / (d * Var(x))` over all entries; 1 when the data has no spread.
pub fn scale_gamma(x: &Matrix) -> f64 {
    let values = x.as_slice();
    if values.is_empty() {
        return 1.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (x.cols() as f64 * var)
    } else {
        1.0
    }
}

enum Kernel<'a> {
    Dense { n: usize, values: Vec<f64> },
    OnDemand { x: &'a Matrix, gamma: f64 },
}

impl<'a> Kernel<'a> {
    fn new(x: &'a Matrix, gamma: f64) -> Self {
        let n = x.rows();
        if n <= DENSE_KERNEL_LIMIT {
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|j| rbf(gamma, x.row(i), x.row(j))).collect())
                .collect();
            Kernel::Dense {
                n,
                values: rows.concat(),
            }
        } else {
            Kernel::OnDemand { x, gamma }
        }
    }

    fn row(&self, i: usize) -> std::borrow::Cow<'_, [f64]> {
        match self {
            Kernel::Dense { n, values } => std::borrow::Cow::Borrowed(&values[i * n..(i + 1) * n]),
            Kernel::OnDemand { x, gamma } => {
                std::borrow::Cow::Owned(x.iter_rows().map(|r| rbf(*gamma, x.row(i), r)).collect())
            }
        }
    }
}

struct DualSolution {
    alpha: Vec<f64>,
    bias: f64,
    iterations: usize,
    max_kkt_violation: f64,
    converged: bool,
}

/// Solves `min 0.5 a'Qa - e'a` s.t. `0 <= a <= C`, `y'a = 0`, with `Q_ij = y_i y_j K_ij`.
fn solve_dual(kernel: &Kernel, y: &[f64], c: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];

    if y.iter().all(|&v| v == y[0]) {
        // one-sided problem: the equality constraint pins alpha at 0
        return DualSolution {
            alpha,
            bias: y[0],
            iterations: 0,
            max_kkt_violation: 0.0,
            converged: true,
        };
    }

    let diag: Vec<f64> = (0..n).map(|i| kernel.row(i)[i]).collect();
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // maximal violating i, by first-order information
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 {
                !upper(alpha[t])
            } else {
                !lower(alpha[t])
            };
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let k_i = kernel.row(i);

        // j by second-order gain among I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 {
                !lower(alpha[t])
            } else {
                !upper(alpha[t])
            };
            if !in_low {
                continue;
            }
            let score = y[t] * grad[t];
            if score >= gmax2 {
                gmax2 = score;
            }
            let grad_diff = gmax + score;
            if grad_diff > 0.0 {
                let quad = diag[i] + diag[t] - 2.0 * k_i[t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < tol || j_sel.is_none() {
            converged = true;
            break;
        }
        let j = j_sel.unwrap();
        let k_j = kernel.row(j);
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k_i[j];
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_i = alpha[i] - old_i;
        let d_j = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k_i[t] * d_i + y[j] * k_j[t] * d_j);
        }
    }

    // bias: average over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };
    let bias = -rho;

    // y_i f(x_i) = G_i + 1 + y_i b
    let mut worst: f64 = 0.0;
    for t in 0..n {
        let margin = grad[t] + 1.0 + y[t] * bias;
        if alpha[t] < c {
            worst = worst.max(1.0 - margin);
        }
        if alpha[t] > 0.0 {
            worst = worst.max(margin - 1.0);
        }
    }

    DualSolution {
        alpha,
        bias,
        iterations,
        max_kkt_violation: worst,
        converged,
    }
}

/// Trains five one-vs-rest RBF classifiers.
pub fn train_rbf_svc(
    x: &Matrix,
    y: &[usize],
    params: &RbfSvcParams,
) -> Result<KernelSvcModel, ModelError> {
    check_training_set(x, y)?;
    if params.c.is_nan() || params.c <= 0.0 {
        return Err(ModelError::NonPositiveC(params.c));
    }
    let gamma = params.gamma.unwrap_or_else(|| scale_gamma(x));
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(ModelError::NonPositiveGamma(gamma));
    }
    let kernel = Kernel::new(x, gamma);
    let per_class = (0..NUM_PLAYERS)
        .into_par_iter()
        .map(|k| {
            let yk = one_vs_rest(y, k);
            let sol = solve_dual(&kernel, &yk, params.c, params.tol, params.max_iter);
            let support: Vec<usize> = (0..x.rows()).filter(|&i| sol.alpha[i] > 0.0).collect();
            KernelClass {
                support_indices: support.clone(),
                support_vectors: support.iter().map(|&i| x.row(i).to_vec()).collect(),
                dual_coef: support.iter().map(|&i| sol.alpha[i] * yk[i]).collect(),
                bias: sol.bias,
                iterations: sol.iterations,
                max_kkt_violation: sol.max_kkt_violation,
                converged: sol.converged,
            }
        })
        .collect();
    Ok(KernelSvcModel {
        feature_schema: FeatureSchema::raw(x.cols()),
        classes: (0..NUM_PLAYERS).collect(),
        c: params.c,
        gamma,
        per_class,
    })
}
