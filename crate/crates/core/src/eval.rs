//! K-fold cross-validation, baselines and error analysis.
//!
//! Accuracy is the unweighted mean of per-fold accuracies; the pooled
//! accuracy (total correct over total evaluated) is reported alongside.

use crate::features::{build_dataset, Dataset, FeatureError, FeatureSpec};
use crate::game::{Role, Seat, NUM_PLAYERS};
use crate::ingest::GameStream;
use crate::linalg::Matrix;
use crate::mlp::{train_mlp, MlpConfig};
use crate::model::{masked_argmax, predict_merlin, Classifier, FeatureSchema, Model, ModelError};
use crate::svm::{train_linear_svc, train_rbf_svc, LinearSvcParams, RbfSvcParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

const FOLD_STREAM: u64 = 0;
const BASELINE_STREAM: u64 = 7;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k = {k} folds is invalid for {n} games (need 2 <= k <= n)")]
    BadK { k: usize, n: usize },
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    BadSplit(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no candidate statistics to search over")]
    EmptyCandidates,
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("game {0} has no recorded human assassination target")]
    MissingHumanTarget(String),
    #[error("model was not trained on game features")]
    NoFeatureSpec,
}

/// Disjoint, covering folds over `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn n(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    /// Every index not in fold `f`, in ascending order.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }
}

/// Seeded shuffle followed by a contiguous partition; the first `n % k`
/// folds get one extra element.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 || k > n {
        return Err(EvalError::BadK { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FOLD_STREAM);
    order.shuffle(&mut rng);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(FoldPlan { seed, folds })
}

/// Produces a classifier from training rows.
pub trait Trainer: Sync {
    fn train(&self, x: &Matrix, y: &[Seat]) -> Result<Box<dyn Classifier>, ModelError>;

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum TrainerSpec {
    LinearSvc(LinearSvcParams),
    RbfSvc(RbfSvcParams),
    Mlp(MlpConfig),
}

impl TrainerSpec {
    /// Trains a model and stamps it with the feature schema.
    pub fn fit(&self, x: &Matrix, y: &[Seat], schema: FeatureSchema) -> Result<Model, ModelError> {
        let mut model = match self {
            TrainerSpec::LinearSvc(p) => Model::LinearSvc(train_linear_svc(x, y, p)?),
            TrainerSpec::RbfSvc(p) => Model::RbfSvc(train_rbf_svc(x, y, p)?),
            TrainerSpec::Mlp(c) => Model::Mlp(train_mlp(x, y, c)?),
        };
        model.set_feature_schema(schema);
        Ok(model)
    }

    pub fn with_seed(&self, seed: u64) -> TrainerSpec {
        match self {
            TrainerSpec::LinearSvc(p) => TrainerSpec::LinearSvc(LinearSvcParams { seed, ..*p }),
            TrainerSpec::RbfSvc(p) => TrainerSpec::RbfSvc(*p),
            TrainerSpec::Mlp(c) => TrainerSpec::Mlp(MlpConfig { seed, ..c.clone() }),
        }
    }
}

impl Trainer for TrainerSpec {
    fn train(&self, x: &Matrix, y: &[Seat]) -> Result<Box<dyn Classifier>, ModelError> {
        Ok(Box::new(self.fit(x, y, FeatureSchema::raw(x.cols()))?))
    }

    fn describe(&self) -> String {
        match self {
            TrainerSpec::LinearSvc(p) => format!("Linear Support Vector Classifier (C={})", p.c),
            TrainerSpec::RbfSvc(p) => {
                format!("Non-Linear RBF Support Vector Classifier (C={})", p.c)
            }
            TrainerSpec::Mlp(c) => {
                let widths: Vec<String> = c.layer_widths.iter().map(|w| w.to_string()).collect();
                format!("{} NN with {} batch size", widths.join("x"), c.batch_size)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Contingency {
    pub both_correct: usize,
    pub human_only: usize,
    pub model_only: usize,
    pub neither: usize,
}

impl Contingency {
    pub fn total(&self) -> usize {
        self.both_correct + self.human_only + self.model_only + self.neither
    }
}

/// Which resistance role the model shot when it missed Merlin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShotBreakdown {
    pub wrong_shots: usize,
    pub percival: f64,
    pub loyal_servant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorAnalysis {
    pub games: usize,
    pub model_accuracy: f64,
    pub human_accuracy: f64,
    pub contingency: Contingency,
    pub shot_breakdown: ShotBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub seeds: Vec<u64>,
    pub mean_accuracies: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub features: String,
    pub games: usize,
    pub folds: usize,
    pub seed: u64,
    pub aggregation: String,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub pooled_accuracy: f64,
    pub train_accuracy: f64,
    pub baseline_random: f64,
    pub baseline_human: Option<f64>,
    pub contingency: Option<Contingency>,
    pub shot_breakdown: ShotBreakdown,
    pub repeats: Option<RepeatSummary>,
}

/// Fraction of games in which a uniformly random shot at a resistance seat hits Merlin.
pub fn baseline_random(stream: &GameStream, seed: u64) -> f64 {
    if stream.is_empty() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BASELINE_STREAM);
    let hits = stream
        .games
        .iter()
        .filter(|g| {
            let resistance: Vec<Seat> = (0..g.roles.len())
                .filter(|&s| !g.roles[s].is_spy())
                .collect();
            let shot = resistance[rng.gen_range(0..resistance.len())];
            g.roles[shot] == Role::Merlin
        })
        .count();
    hits as f64 / stream.len() as f64
}

/// Fraction of recorded assassinations that hit Merlin, if any were recorded.
pub fn baseline_human(stream: &GameStream) -> Option<f64> {
    let shots: Vec<bool> = stream
        .games
        .iter()
        .filter_map(|g| g.assassination.map(|a| a.correct))
        .collect();
    (!shots.is_empty()).then(|| shots.iter().filter(|&&c| c).count() as f64 / shots.len() as f64)
}

/// Contingency against the human shot and the role breakdown of wrong shots.
pub fn analyze_predictions(ds: &Dataset, predictions: &[Seat]) -> Result<ErrorAnalysis, EvalError> {
    let mut table = Contingency::default();
    let (mut percival, mut servant, mut wrong) = (0usize, 0usize, 0usize);
    let mut human_hits = 0;
    for (i, &pred) in predictions.iter().enumerate() {
        let human = ds.human_targets[i]
            .ok_or_else(|| EvalError::MissingHumanTarget(ds.game_ids[i].clone()))?;
        let label = ds.labels[i];
        let (h, m) = (human == label, pred == label);
        human_hits += usize::from(h);
        match (h, m) {
            (true, true) => table.both_correct += 1,
            (true, false) => table.human_only += 1,
            (false, true) => table.model_only += 1,
            (false, false) => table.neither += 1,
        }
        if !m {
            wrong += 1;
            match ds.roles[i][pred] {
                Role::Percival => percival += 1,
                Role::LoyalServant => servant += 1,
                _ => {}
            }
        }
    }
    let n = predictions.len();
    let frac = |c: usize| {
        if wrong == 0 {
            0.0
        } else {
            c as f64 / wrong as f64
        }
    };
    Ok(ErrorAnalysis {
        games: n,
        model_accuracy: if n == 0 {
            0.0
        } else {
            (table.both_correct + table.model_only) as f64 / n as f64
        },
        human_accuracy: if n == 0 {
            0.0
        } else {
            human_hits as f64 / n as f64
        },
        contingency: table,
        shot_breakdown: ShotBreakdown {
            wrong_shots: wrong,
            percival: frac(percival),
            loyal_servant: frac(servant),
        },
    })
}

fn shot_breakdown_only(ds: &Dataset, predictions: &[Seat]) -> ShotBreakdown {
    let mut b = ShotBreakdown::default();
    let (mut p, mut s) = (0, 0);
    for (i, &pred) in predictions.iter().enumerate() {
        if pred != ds.labels[i] {
            b.wrong_shots += 1;
            match ds.roles[i][pred] {
                Role::Percival => p += 1,
                Role::LoyalServant => s += 1,
                _ => {}
            }
        }
    }
    if b.wrong_shots > 0 {
        b.percival = p as f64 / b.wrong_shots as f64;
        b.loyal_servant = s as f64 / b.wrong_shots as f64;
    }
    b
}

/// Masked predictions of a classifier over a whole dataset.
pub fn predict_dataset<C: Classifier + ?Sized>(
    model: &C,
    ds: &Dataset,
) -> Result<Vec<Seat>, ModelError> {
    (0..ds.len())
        .map(|i| predict_merlin(model, ds.x.row(i), &ds.masks[i]))
        .collect()
}

/// Error analysis of a trained model on a stream with recorded human shots.
pub fn error_analysis(model: &Model, stream: &GameStream) -> Result<ErrorAnalysis, EvalError> {
    let spec = model
        .feature_schema()
        .spec
        .ok_or(EvalError::NoFeatureSpec)?;
    if let Some(g) = stream.games.iter().find(|g| g.assassination.is_none()) {
        return Err(EvalError::MissingHumanTarget(g.game_id.clone()));
    }
    let ds = build_dataset(stream, &spec)?;
    let predictions = predict_dataset(model, &ds)?;
    analyze_predictions(&ds, &predictions)
}

fn accuracy(predictions: &[Seat], labels: &[Seat]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    hits as f64 / labels.len() as f64
}

/// Per-fold result of [`cross_validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub fold_accuracies: Vec<f64>,
    pub fold_sizes: Vec<usize>,
    pub train_accuracies: Vec<f64>,
    /// Out-of-fold prediction for every row.
    pub predictions: Vec<Seat>,
}

impl CvOutcome {
    pub fn mean_accuracy(&self) -> f64 {
        self.fold_accuracies.iter().sum::<f64>() / self.fold_accuracies.len() as f64
    }
}

/// Cross-validates on an already featurized dataset with a fixed fold plan.
pub fn cross_validate_dataset(
    ds: &Dataset,
    trainer: &dyn Trainer,
    plan: &FoldPlan,
) -> Result<CvOutcome, EvalError> {
    if plan.n() != ds.len() {
        return Err(EvalError::BadK {
            k: plan.k(),
            n: ds.len(),
        });
    }
    let per_fold: Vec<(f64, f64, Vec<Seat>)> = (0..plan.k())
        .into_par_iter()
        .map(|f| {
            let test = &plan.folds[f];
            let train_idx = plan.complement(f);
            let train = ds.subset(&train_idx);
            let model = trainer
                .train(&train.x, &train.labels)
                .map_err(|source| EvalError::Fold { fold: f, source })?;
            let held_out = ds.subset(test);
            let preds = predict_dataset(model.as_ref(), &held_out)
                .map_err(|source| EvalError::Fold { fold: f, source })?;
            let train_preds = predict_dataset(model.as_ref(), &train)
                .map_err(|source| EvalError::Fold { fold: f, source })?;
            Ok((
                accuracy(&preds, &held_out.labels),
                accuracy(&train_preds, &train.labels),
                preds,
            ))
        })
        .collect::<Result<_, EvalError>>()?;

    let mut predictions = vec![0; ds.len()];
    for (f, (_, _, preds)) in per_fold.iter().enumerate() {
        for (&i, &p) in plan.folds[f].iter().zip(preds) {
            predictions[i] = p;
        }
    }
    Ok(CvOutcome {
        fold_accuracies: per_fold.iter().map(|r| r.0).collect(),
        fold_sizes: plan.folds.iter().map(Vec::len).collect(),
        train_accuracies: per_fold.iter().map(|r| r.1).collect(),
        predictions,
    })
}

fn feature_label(spec: &FeatureSpec) -> String {
    match spec {
        FeatureSpec::Engineered { subset, .. } => format!("engineered ({subset})"),
        FeatureSpec::General => "general vote history".to_string(),
    }
}

fn build_report(
    stream: &GameStream,
    ds: &Dataset,
    spec: &FeatureSpec,
    trainer: &dyn Trainer,
    outcome: &CvOutcome,
    seed: u64,
    aggregation: &str,
) -> EvalReport {
    let analysis = analyze_predictions(ds, &outcome.predictions).ok();
    EvalReport {
        model: trainer.describe(),
        features: feature_label(spec),
        games: ds.len(),
        folds: outcome.fold_accuracies.len(),
        seed,
        aggregation: aggregation.to_string(),
        fold_sizes: outcome.fold_sizes.clone(),
        fold_accuracies: outcome.fold_accuracies.clone(),
        mean_accuracy: outcome.mean_accuracy(),
        pooled_accuracy: accuracy(&outcome.predictions, &ds.labels),
        train_accuracy: outcome.train_accuracies.iter().sum::<f64>()
            / outcome.train_accuracies.len() as f64,
        baseline_random: baseline_random(stream, seed),
        baseline_human: baseline_human(stream),
        contingency: analysis.as_ref().map(|a| a.contingency),
        shot_breakdown: analysis
            .map(|a| a.shot_breakdown)
            .unwrap_or_else(|| shot_breakdown_only(ds, &outcome.predictions)),
        repeats: None,
    }
}

/// K-fold cross-validation of `trainer` on `spec` features.
pub fn cross_validate(
    stream: &GameStream,
    spec: &FeatureSpec,
    trainer: &dyn Trainer,
    k: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    let ds = build_dataset(stream, spec)?;
    let plan = kfold_split(ds.len(), k, seed)?;
    let outcome = cross_validate_dataset(&ds, trainer, &plan)?;
    Ok(build_report(
        stream,
        &ds,
        spec,
        trainer,
        &outcome,
        seed,
        "unweighted mean of fold accuracies",
    ))
}

/// Repeats cross-validation over `repeats` training seeds on one fold plan.
/// The returned report holds the first run plus the mean and sample stddev.
pub fn cross_validate_repeated(
    stream: &GameStream,
    spec: &FeatureSpec,
    trainer: &TrainerSpec,
    k: usize,
    seed: u64,
    repeats: usize,
) -> Result<EvalReport, EvalError> {
    let ds = build_dataset(stream, spec)?;
    let plan = kfold_split(ds.len(), k, seed)?;
    let seeds: Vec<u64> = (0..repeats.max(1) as u64).map(|r| seed + r).collect();
    let outcomes = seeds
        .iter()
        .map(|&s| cross_validate_dataset(&ds, &trainer.with_seed(s), &plan))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = build_report(
        stream,
        &ds,
        spec,
        trainer,
        &outcomes[0],
        seed,
        "unweighted mean of fold accuracies",
    );
    let means: Vec<f64> = outcomes.iter().map(CvOutcome::mean_accuracy).collect();
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    let stddev = if means.len() > 1 {
        (means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (means.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    report.repeats = Some(RepeatSummary {
        seeds,
        mean_accuracies: means,
        mean,
        stddev,
    });
    Ok(report)
}

/// Single shuffled train/test split with the given test fraction.
pub fn holdout(
    stream: &GameStream,
    spec: &FeatureSpec,
    trainer: &dyn Trainer,
    test_fraction: f64,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::BadSplit(test_fraction));
    }
    let ds = build_dataset(stream, spec)?;
    let n = ds.len();
    let test_n = ((n as f64 * test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    if n < 2 {
        return Err(EvalError::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FOLD_STREAM);
    order.shuffle(&mut rng);
    let plan = FoldPlan {
        seed,
        folds: vec![order[..test_n].to_vec(), order[test_n..].to_vec()],
    };
    // evaluate only the first fold as the test set
    let train = ds.subset(&plan.folds[1]);
    let test = ds.subset(&plan.folds[0]);
    let model = trainer
        .train(&train.x, &train.labels)
        .map_err(|source| EvalError::Fold { fold: 0, source })?;
    let preds = predict_dataset(model.as_ref(), &test)?;
    let train_preds = predict_dataset(model.as_ref(), &train)?;
    let outcome = CvOutcome {
        fold_accuracies: vec![accuracy(&preds, &test.labels)],
        fold_sizes: vec![test_n],
        train_accuracies: vec![accuracy(&train_preds, &train.labels)],
        predictions: preds,
    };
    let mut report = build_report(
        stream,
        &test,
        spec,
        trainer,
        &outcome,
        seed,
        "single held-out split",
    );
    report.games = n;
    report.folds = 1;
    Ok(report)
}

fn pct(v: f64) -> String {
    format!("{v:.3}")
}

impl EvalReport {
    /// Table in the layout Algorithm | Training Accuracy | Test Accuracy.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "features: {}", self.features);
        let _ = writeln!(
            out,
            "games: {}  folds: {}  seed: {}  aggregation: {}",
            self.games, self.folds, self.seed, self.aggregation
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<48} | {:>17} | {:>13}",
            "Algorithm", "Training Accuracy", "Test Accuracy"
        );
        let _ = writeln!(out, "{}", "-".repeat(84));
        let _ = writeln!(
            out,
            "{:<48} | {:>17} | {:>13}",
            "Random",
            "N/A",
            pct(self.baseline_random)
        );
        if let Some(h) = self.baseline_human {
            let _ = writeln!(out, "{:<48} | {:>17} | {:>13}", "Human", "N/A", pct(h));
        }
        let test = match &self.repeats {
            Some(r) if r.seeds.len() > 1 => format!("{} +/- {}", pct(r.mean), pct(r.stddev)),
            _ => pct(self.mean_accuracy),
        };
        let _ = writeln!(
            out,
            "{:<48} | {:>17} | {:>13}",
            self.model,
            pct(self.train_accuracy),
            test
        );
        let _ = writeln!(out);
        let folds: Vec<String> = self.fold_accuracies.iter().map(|a| pct(*a)).collect();
        let _ = writeln!(out, "fold accuracies: {}", folds.join(" "));
        let _ = writeln!(
            out,
            "mean accuracy: {:.4}  pooled accuracy: {:.4}",
            self.mean_accuracy, self.pooled_accuracy
        );
        if let Some(c) = &self.contingency {
            let _ = writeln!(out);
            let _ = writeln!(out, "Both human and model are correct: {}", c.both_correct);
            let _ = writeln!(out, "Human is correct, but not model: {}", c.human_only);
            let _ = writeln!(out, "Model is correct, but not human: {}", c.model_only);
            let _ = writeln!(out, "Neither human nor model are correct: {}", c.neither);
        }
        let b = &self.shot_breakdown;
        let _ = writeln!(
            out,
            "wrong shots: {} (Percival {:.1}%, Loyal Servant {:.1}%)",
            b.wrong_shots,
            100.0 * b.percival,
            100.0 * b.loyal_servant
        );
        out
    }
}

impl ErrorAnalysis {
    pub fn to_text(&self) -> String {
        let c = &self.contingency;
        let b = &self.shot_breakdown;
        format!(
            "games: {}\nmodel accuracy: {:.3}\nhuman accuracy: {:.3}\n\
             Both human and model are correct: {}\nHuman is correct, but not model: {}\n\
             Model is correct, but not human: {}\nNeither human nor model are correct: {}\n\
             wrong shots: {} (Percival {:.1}%, Loyal Servant {:.1}%)\n",
            self.games,
            self.model_accuracy,
            self.human_accuracy,
            c.both_correct,
            c.human_only,
            c.model_only,
            c.neither,
            b.wrong_shots,
            100.0 * b.percival,
            100.0 * b.loyal_servant
        )
    }
}

/// Resistance mask helper for callers holding only roles.
pub fn resistance_mask(roles: &[Role]) -> [bool; NUM_PLAYERS] {
    let mut mask = [false; NUM_PLAYERS];
    for (s, r) in roles.iter().enumerate().take(NUM_PLAYERS) {
        mask[s] = !r.is_spy();
    }
    mask
}

/// Masked argmax over fixed scores; exposed for stub classifiers in tests.
pub fn masked_choice(scores: &[f64; NUM_PLAYERS], roles: &[Role]) -> Result<Seat, ModelError> {
    masked_argmax(scores, &resistance_mask(roles))
}
