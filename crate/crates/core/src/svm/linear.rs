//! Primal linear SVC: for each class k,
//!
//! `F(w, b) = 0.5 |w|^2 + C * sum_i max(0, 1 - y_i (w.x_i + b))^2`
//!
//! minimized by a generalized Newton method: conjugate-gradient solves of the
//! generalized Hessian followed by a backtracking line search. Training stops
//! once `|grad F| <= tol * max(1, |grad F(0)|)`.

use super::{check_training_set, one_vs_rest};
use crate::game::NUM_PLAYERS;
use crate::linalg::{axpy, dot, norm, Matrix};
use crate::model::{check_dim, Classifier, FeatureSchema, ModelError, Scores};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSvcParams {
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LinearSvcParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 100_000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearTrainingMeta {
    pub iterations: Vec<usize>,
    pub initial_grad_norm: Vec<f64>,
    pub final_grad_norm: Vec<f64>,
    pub converged: Vec<bool>,
    /// Classes with no positive training rows; their classifier rejects everything.
    pub absent_classes: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvcModel {
    pub feature_schema: FeatureSchema,
    pub classes: Vec<usize>,
    pub c: f64,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub training_meta: LinearTrainingMeta,
}

impl Classifier for LinearSvcModel {
    fn decision_scores(&self, x: &[f64]) -> Result<Scores, ModelError> {
        check_dim(self.feature_schema.dim, x)?;
        let mut scores = [0.0; NUM_PLAYERS];
        for (k, s) in scores.iter_mut().enumerate() {
            *s = dot(&self.weights[k], x) + self.biases[k];
        }
        Ok(scores)
    }
}

/// One binary squared-hinge problem.
struct Binary<'a> {
    x: &'a Matrix,
    y: Vec<f64>,
    c: f64,
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
    /// Rows with margin below 1.
    active: Vec<usize>,
}

impl Binary<'_> {
    fn dim(&self) -> usize {
        self.x.cols()
    }

    fn margins(&self, theta: &[f64]) -> Vec<f64> {
        let (w, b) = theta.split_at(self.dim());
        self.x
            .iter_rows()
            .zip(&self.y)
            .map(|(row, &yi)| yi * (dot(w, row) + b[0]))
            .collect()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let w = &theta[..self.dim()];
        let loss: f64 = self
            .margins(theta)
            .iter()
            .map(|&z| if z < 1.0 { (1.0 - z) * (1.0 - z) } else { 0.0 })
            .sum();
        0.5 * dot(w, w) + self.c * loss
    }

    fn eval(&self, theta: &[f64]) -> Eval {
        let d = self.dim();
        let margins = self.margins(theta);
        let mut grad = vec![0.0; d + 1];
        grad[..d].copy_from_slice(&theta[..d]);
        let mut loss = 0.0;
        let mut active = Vec::new();
        for (i, &z) in margins.iter().enumerate() {
            if z < 1.0 {
                let slack = 1.0 - z;
                loss += slack * slack;
                let coef = -2.0 * self.c * slack * self.y[i];
                axpy(coef, self.x.row(i), &mut grad[..d]);
                grad[d] += coef;
                active.push(i);
            }
        }
        let w = &theta[..d];
        Eval {
            value: 0.5 * dot(w, w) + self.c * loss,
            grad,
            active,
        }
    }

    /// Generalized Hessian-vector product at the given active set.
    fn hess_vec(&self, active: &[usize], v: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out[..d].copy_from_slice(&v[..d]);
        // tiny curvature on the bias keeps CG well-posed when nothing is active
        out[d] = 1e-12 * v[d];
        for &i in active {
            let row = self.x.row(i);
            let s = 2.0 * self.c * (dot(row, &v[..d]) + v[d]);
            axpy(s, row, &mut out[..d]);
            out[d] += s;
        }
    }

    /// Approximately solves `H s = -g` by conjugate gradients.
    fn newton_direction(&self, active: &[usize], grad: &[f64]) -> Vec<f64> {
        let m = grad.len();
        let mut s = vec![0.0; m];
        let mut r: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut p = r.clone();
        let mut hp = vec![0.0; m];
        let mut rr = dot(&r, &r);
        let stop = (1e-10 * rr).max(f64::MIN_POSITIVE);
        for _ in 0..(2 * m + 10) {
            if rr <= stop {
                break;
            }
            self.hess_vec(active, &p, &mut hp);
            let php = dot(&p, &hp);
            if php <= 0.0 {
                break;
            }
            let alpha = rr / php;
            axpy(alpha, &p, &mut s);
            axpy(-alpha, &hp, &mut r);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rr = rr_new;
        }
        if dot(&s, grad) >= 0.0 {
            // fall back to steepest descent
            return grad.iter().map(|g| -g).collect();
        }
        s
    }
}

struct BinaryFit {
    theta: Vec<f64>,
    iterations: usize,
    initial_grad_norm: f64,
    final_grad_norm: f64,
    converged: bool,
}

fn fit_binary(problem: &Binary, max_iter: usize, tol: f64) -> BinaryFit {
    let d = problem.dim();
    let mut theta = vec![0.0; d + 1];
    let mut current = problem.eval(&theta);
    let initial = norm(&current.grad);
    let target = tol * initial.max(1.0);
    let mut iterations = 0;
    let mut grad_norm = initial;

    while grad_norm > target && iterations < max_iter {
        let dir = problem.newton_direction(&current.active, &current.grad);
        let slope = dot(&dir, &current.grad);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, s)| t + step * s).collect();
            let value = problem.value(&trial);
            if value <= current.value + 1e-4 * step * slope {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some(next) => {
                theta = next;
                current = problem.eval(&theta);
                grad_norm = norm(&current.grad);
            }
            // no decrease representable in floating point
            None => break,
        }
    }
    BinaryFit {
        theta,
        iterations,
        initial_grad_norm: initial,
        final_grad_norm: grad_norm,
        converged: grad_norm <= target,
    }
}

/// Trains five one-vs-rest classifiers, one per seat.
pub fn train_linear_svc(
    x: &Matrix,
    y: &[usize],
    params: &LinearSvcParams,
) -> Result<LinearSvcModel, ModelError> {
    check_training_set(x, y)?;
    if params.c.is_nan() || params.c <= 0.0 {
        return Err(ModelError::NonPositiveC(params.c));
    }
    let d = x.cols();
    let fits: Vec<BinaryFit> = (0..NUM_PLAYERS)
        .into_par_iter()
        .map(|k| {
            let problem = Binary {
                x,
                y: one_vs_rest(y, k),
                c: params.c,
            };
            fit_binary(&problem, params.max_iter, params.tol)
        })
        .collect();

    let absent_classes = (0..NUM_PLAYERS).filter(|k| !y.contains(k)).collect();
    Ok(LinearSvcModel {
        feature_schema: FeatureSchema::raw(d),
        classes: (0..NUM_PLAYERS).collect(),
        c: params.c,
        weights: fits.iter().map(|f| f.theta[..d].to_vec()).collect(),
        biases: fits.iter().map(|f| f.theta[d]).collect(),
        training_meta: LinearTrainingMeta {
            iterations: fits.iter().map(|f| f.iterations).collect(),
            initial_grad_norm: fits.iter().map(|f| f.initial_grad_norm).collect(),
            final_grad_norm: fits.iter().map(|f| f.final_grad_norm).collect(),
            converged: fits.iter().map(|f| f.converged).collect(),
            absent_classes,
            seed: params.seed,
        },
    })
}

/// Value of the class-`k` primal objective at the model's parameters.
pub fn primal_objective(model: &LinearSvcModel, x: &Matrix, y: &[usize], class: usize) -> f64 {
    let problem = Binary {
        x,
        y: one_vs_rest(y, class),
        c: model.c,
    };
    let mut theta = model.weights[class].clone();
    theta.push(model.biases[class]);
    problem.value(&theta)
}
