//! Fully connected network: ReLU hidden layers, softmax output over the five
//! seats, mean cross-entropy loss, trained with Adam on seeded mini-batches.

use crate::game::NUM_PLAYERS;
use crate::linalg::Matrix;
use crate::model::{check_dim, Classifier, FeatureSchema, ModelError, Scores};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Hidden layer widths; the 5-unit output layer is implicit.
    pub layer_widths: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            layer_widths: vec![16, 16, 8],
            batch_size: 256,
            learning_rate: 1e-5,
            epochs: 100,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl MlpConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if self.layer_widths.contains(&0) {
            return Err(ModelError::InvalidConfig(
                "layer widths must be at least 1".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig(
                "batch size must be at least 1".into(),
            ));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(ModelError::InvalidConfig(
                "learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `outputs x inputs` weights, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs)
                .map(|_| rng.gen_range(-limit..=limit))
                .collect(),
            biases: vec![0.0; outputs],
        }
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.biases[o]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub feature_schema: FeatureSchema,
    pub classes: Vec<usize>,
    pub config: MlpConfig,
    pub layers: Vec<DenseLayer>,
    pub training_curve: Vec<EpochStats>,
}

/// Pre-activations and activations of every layer for one input.
struct Trace {
    /// `activations[0]` is the input; `activations[l + 1]` is layer l's output.
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

impl MlpModel {
    /// A network with all parameters zero.
    pub fn zeros(input_dim: usize, config: MlpConfig) -> Self {
        let layers = Self::shape(input_dim, &config.layer_widths)
            .into_iter()
            .map(|(i, o)| DenseLayer::zeros(i, o))
            .collect();
        Self::with_layers(input_dim, config, layers)
    }

    /// Glorot-uniform weights and zero biases drawn from `config.seed`.
    pub fn init(input_dim: usize, config: MlpConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layers = Self::shape(input_dim, &config.layer_widths)
            .into_iter()
            .map(|(i, o)| DenseLayer::glorot(i, o, &mut rng))
            .collect();
        Self::with_layers(input_dim, config, layers)
    }

    fn with_layers(input_dim: usize, config: MlpConfig, layers: Vec<DenseLayer>) -> Self {
        Self {
            feature_schema: FeatureSchema::raw(input_dim),
            classes: (0..NUM_PLAYERS).collect(),
            config,
            layers,
            training_curve: Vec::new(),
        }
    }

    fn shape(input_dim: usize, hidden: &[usize]) -> Vec<(usize, usize)> {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(NUM_PLAYERS);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut activations = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.apply(&activations[l], &mut z);
            let a = if l == last {
                softmax(&z)
            } else {
                z.iter().map(|&v| relu(v)).collect()
            };
            pre.push(z);
            activations.push(a);
        }
        Trace { activations, pre }
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Scores, ModelError> {
        check_dim(self.input_dim(), x)?;
        let trace = self.trace(x);
        let mut out = [0.0; NUM_PLAYERS];
        out.copy_from_slice(trace.activations.last().unwrap());
        Ok(out)
    }

    /// Cross-entropy of one example.
    pub fn loss(&self, x: &[f64], label: usize) -> f64 {
        let trace = self.trace(x);
        -trace.activations.last().unwrap()[label]
            .max(f64::MIN_POSITIVE)
            .ln()
    }

    /// Adds the loss gradient of one example into `grads` (same layout as the layers).
    fn accumulate_gradient(&self, x: &[f64], label: usize, grads: &mut [DenseLayer]) -> f64 {
        let trace = self.trace(x);
        let probs = trace.activations.last().unwrap();
        let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
        let mut delta: Vec<f64> = probs.clone();
        delta[label] -= 1.0;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.activations[l];
            let g = &mut grads[l];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, a) in row.iter_mut().zip(input) {
                    *gw += d * a;
                }
            }
            if l > 0 {
                let prev_pre = &trace.pre[l - 1];
                let mut next = vec![0.0; layer.inputs];
                for (d, row) in delta.iter().zip(layer.weights.chunks(layer.inputs)) {
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += d * w;
                    }
                }
                for (n, z) in next.iter_mut().zip(prev_pre) {
                    if *z <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
        loss
    }

    fn zero_like(&self) -> Vec<DenseLayer> {
        self.layers
            .iter()
            .map(|l| DenseLayer::zeros(l.inputs, l.outputs))
            .collect()
    }

    /// Mean loss and unmasked argmax accuracy over a dataset.
    pub fn evaluate(&self, x: &Matrix, y: &[usize]) -> (f64, f64) {
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (row, &label) in x.iter_rows().zip(y) {
            let probs = self.trace(row).activations.pop().unwrap();
            loss -= probs[label].max(f64::MIN_POSITIVE).ln();
            let best = (0..NUM_PLAYERS).fold(0, |b, k| if probs[k] > probs[b] { k } else { b });
            if best == label {
                correct += 1;
            }
        }
        let n = y.len().max(1) as f64;
        (loss / n, correct as f64 / n)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn parameter_count(&self) -> usize {
        self.params().count()
    }

    /// All parameters flattened layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.params().copied().collect()
    }

    /// Overwrites the parameters from a vector in [`MlpModel::parameters`] order.
    pub fn set_parameters(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.parameter_count());
        for (p, v) in self.params_mut().zip(values) {
            *p = *v;
        }
    }

    /// Backpropagated gradient of the single-example loss, in parameter order.
    pub fn loss_gradient(&self, x: &[f64], label: usize) -> Vec<f64> {
        let mut grads = self.zero_like();
        self.accumulate_gradient(x, label, &mut grads);
        grads
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    /// Writes the training curve as `epoch,loss,accuracy` CSV.
    pub fn write_curve_csv<W: Write>(&self, dest: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(dest);
        w.write_record(["epoch", "loss", "accuracy"])?;
        for e in &self.training_curve {
            w.write_record([
                e.epoch.to_string(),
                e.loss.to_string(),
                e.accuracy.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Classifier for MlpModel {
    fn decision_scores(&self, x: &[f64]) -> Result<Scores, ModelError> {
        self.forward(x)
    }
}

/// Trains with Adam on mini-batches reshuffled each epoch from `config.seed`.
pub fn train_mlp(x: &Matrix, y: &[usize], config: &MlpConfig) -> Result<MlpModel, ModelError> {
    crate::svm::check_training_set(x, y)?;
    config.validate()?;
    let mut model = MlpModel::init(x.cols(), config.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let count = model.parameter_count();
    let mut m = vec![0.0; count];
    let mut v = vec![0.0; count];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..x.rows()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_like();
            for &i in batch {
                model.accumulate_gradient(x.row(i), y[i], &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            step += 1;
            let bc1 = 1.0 - config.beta1.powi(step);
            let bc2 = 1.0 - config.beta2.powi(step);
            let flat_grads = grads
                .iter()
                .flat_map(|l| l.weights.iter().chain(l.biases.iter()));
            for (((p, g), mi), vi) in model.params_mut().zip(flat_grads).zip(&mut m).zip(&mut v) {
                let g = g * scale;
                *mi = config.beta1 * *mi + (1.0 - config.beta1) * g;
                *vi = config.beta2 * *vi + (1.0 - config.beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        }
        let (loss, accuracy) = model.evaluate(x, y);
        model.training_curve.push(EpochStats {
            epoch: epoch + 1,
            loss,
            accuracy,
        });
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters whose perturbation moved a ReLU input across 0.
    pub excluded: usize,
    /// Hidden units with pre-activation exactly 0 at the base point.
    pub kink_units: usize,
}

fn relu_pattern(model: &MlpModel, x: &[f64]) -> Vec<bool> {
    let trace = model.trace(x);
    let hidden = trace.pre.len() - 1;
    trace.pre[..hidden]
        .iter()
        .flatten()
        .map(|&z| z > 0.0)
        .collect()
}

/// Compares backpropagated gradients of the single-example loss against
/// central differences `(f(p + h) - f(p - h)) / 2h`.
pub fn gradient_check(model: &MlpModel, x: &[f64], label: usize, h: f64) -> GradCheckReport {
    let analytic = model.loss_gradient(x, label);

    let base_trace = model.trace(x);
    let hidden = base_trace.pre.len() - 1;
    let kink_units = base_trace.pre[..hidden]
        .iter()
        .flatten()
        .filter(|&&z| z == 0.0)
        .count();
    let base_pattern = relu_pattern(model, x);

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        excluded: 0,
        kink_units,
    };
    let mut params = model.parameters();
    for (idx, &a) in analytic.iter().enumerate() {
        let original = params[idx];
        params[idx] = original + h;
        probe.set_parameters(&params);
        let plus = probe.loss(x, label);
        let plus_pattern = relu_pattern(&probe, x);
        params[idx] = original - h;
        probe.set_parameters(&params);
        let minus = probe.loss(x, label);
        let minus_pattern = relu_pattern(&probe, x);
        params[idx] = original;

        if plus_pattern != base_pattern || minus_pattern != base_pattern {
            report.excluded += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
        report.max_relative_error = report.max_relative_error.max(rel);
        report.checked += 1;
    }
    report
}
