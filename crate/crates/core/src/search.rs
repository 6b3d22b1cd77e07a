//! Exhaustive feature-subset search over the nine engineered statistics.
//!
//! Statistics are computed once for every game; each subset selects columns
//! from that table and is cross-validated on one shared fold plan.

use crate::eval::{cross_validate_dataset, kfold_split, EvalError, FoldPlan, TrainerSpec};
use crate::features::{build_dataset, CleanTeamRule, Dataset, FeatureSpec, StatSet, STAT_COUNT};
use crate::game::NUM_PLAYERS;
use crate::ingest::GameStream;
use crate::svm::LinearSvcParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub candidates: StatSet,
    pub folds: usize,
    pub seed: u64,
    pub clean_rule: CleanTeamRule,
    pub trainer: TrainerSpec,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            candidates: StatSet::FULL,
            folds: 10,
            seed: 0,
            clean_rule: CleanTeamRule::default(),
            trainer: TrainerSpec::LinearSvc(LinearSvcParams::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub subset: StatSet,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub games: usize,
    pub folds: usize,
    pub seed: u64,
    pub evaluated: usize,
    pub best: StatSet,
    pub ranking: Vec<SubsetScore>,
}

/// Columns of the full 45-wide table (seat-major, then statistic) for `subset`.
pub fn subset_columns(subset: StatSet) -> Vec<usize> {
    (0..NUM_PLAYERS)
        .flat_map(|seat| subset.iter().map(move |s| seat * STAT_COUNT + s.index()))
        .collect()
}

/// Mean accuracy descending, then fewer statistics, then lexicographic stat ids.
pub fn rank_order(a: &SubsetScore, b: &SubsetScore) -> Ordering {
    b.mean_accuracy
        .partial_cmp(&a.mean_accuracy)
        .unwrap_or(Ordering::Equal)
        .then(a.subset.len().cmp(&b.subset.len()))
        .then_with(|| {
            let ia: Vec<usize> = a.subset.iter().map(|s| s.index()).collect();
            let ib: Vec<usize> = b.subset.iter().map(|s| s.index()).collect();
            ia.cmp(&ib)
        })
}

/// Evaluates one subset against a precomputed full-statistics dataset.
pub fn evaluate_subset(
    full: &Dataset,
    subset: StatSet,
    trainer: &TrainerSpec,
    plan: &FoldPlan,
) -> Result<SubsetScore, EvalError> {
    let ds = full.with_features(full.x.select_cols(&subset_columns(subset)));
    let outcome = cross_validate_dataset(&ds, trainer, plan)?;
    Ok(SubsetScore {
        subset,
        mean_accuracy: outcome.mean_accuracy(),
        fold_accuracies: outcome.fold_accuracies,
    })
}

pub fn powerset_search(
    stream: &GameStream,
    config: &SearchConfig,
) -> Result<SearchResult, EvalError> {
    let full_spec = FeatureSpec::Engineered {
        subset: StatSet::FULL,
        clean_rule: config.clean_rule,
    };
    if config.candidates.is_empty() {
        return Err(EvalError::EmptyCandidates);
    }
    if stream.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let full = build_dataset(stream, &full_spec)?;
    let plan = kfold_split(full.len(), config.folds, config.seed)?;
    let subsets = config.candidates.non_empty_subsets();
    let mut ranking = subsets
        .par_iter()
        .map(|&s| evaluate_subset(&full, s, &config.trainer, &plan))
        .collect::<Result<Vec<_>, _>>()?;
    ranking.sort_by(rank_order);
    Ok(SearchResult {
        games: full.len(),
        folds: config.folds,
        seed: config.seed,
        evaluated: ranking.len(),
        best: ranking
            .first()
            .map(|r| r.subset)
            .unwrap_or(StatSet::from_bits(0)),
        ranking,
    })
}

impl SearchResult {
    /// One row per subset in rank order.
    pub fn write_csv<W: Write>(&self, dest: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(dest);
        let mut header = vec![
            "rank".to_string(),
            "subset".into(),
            "size".into(),
            "mean_accuracy".into(),
        ];
        header.extend((1..=self.folds).map(|f| format!("fold_{f}")));
        w.write_record(&header)?;
        for (i, r) in self.ranking.iter().enumerate() {
            let mut row = vec![
                (i + 1).to_string(),
                r.subset.to_string(),
                r.subset.len().to_string(),
                r.mean_accuracy.to_string(),
            ];
            row.extend(r.fold_accuracies.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, top: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "evaluated {} subsets on {} games ({}-fold, seed {})",
            self.evaluated, self.games, self.folds, self.seed
        );
        let _ = writeln!(out, "best subset: {}", self.best);
        for (i, r) in self.ranking.iter().take(top).enumerate() {
            let _ = writeln!(
                out,
                "{:>3}. {:<28} {:.4}",
                i + 1,
                r.subset.to_string(),
                r.mean_accuracy
            );
        }
        out
    }
}
