//! Live advice: rank the resistance seats of a (possibly partial) game view.
//!
//! Scoring happens in canonical seat order, so ties break exactly as they do
//! offline; the response is then relabeled to the seats of the request.

use crate::features::{FeatureError, FeatureSpec};
use crate::game::{validate_view, AssassinView, Seat, Violation, MISSIONS_TO_WIN, NUM_PLAYERS};
use crate::model::{masked_argmax, Classifier, FeatureSchema, Model, ModelError};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const API_VERSION: &str = "1";

/// A model together with the checksum of the file it came from.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: Model,
    pub checksum: String,
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let (model, checksum) = Model::load(path)?;
        Ok(Self { model, checksum })
    }

    pub fn meta(&self) -> ModelMeta {
        ModelMeta {
            model_type: self.model.model_type().to_string(),
            feature_schema: self.model.feature_schema().clone(),
            checksum: self.checksum.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_type: String,
    pub feature_schema: FeatureSchema,
    pub checksum: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedSeat {
    pub seat: Seat,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdviceFlags {
    /// Every feature is zero, so the ranking carries no information.
    pub no_signal: bool,
    /// Fewer than three missions have succeeded so far.
    pub partial: bool,
    pub proposals_seen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceResponse {
    pub api_version: String,
    pub target: Seat,
    pub ranking: Vec<RankedSeat>,
    pub scores: Vec<f64>,
    pub meta: AdviceFlags,
    pub model_meta: ModelMeta,
}

#[derive(Debug, Error)]
pub enum AdviceError {
    #[error("game view violates {} rule(s)", .0.len())]
    InvalidView(Vec<Violation>),
    #[error("model cannot featurize games: {0}")]
    Schema(String),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The featurizer a model needs for live views, checked against its declared width.
pub fn live_feature_spec(model: &Model) -> Result<FeatureSpec, AdviceError> {
    let schema = model.feature_schema();
    let spec = schema.spec.ok_or_else(|| {
        AdviceError::Schema(format!(
            "feature schema '{}' has no game featurizer",
            schema.id
        ))
    })?;
    if spec.dim() != schema.dim {
        return Err(AdviceError::Schema(format!(
            "schema '{}' declares {} features but its featurizer yields {}",
            schema.id,
            schema.dim,
            spec.dim()
        )));
    }
    Ok(spec)
}

/// Ranks the three resistance seats of `view` by the model's Merlin score.
pub fn advise(view: &AssassinView, loaded: &LoadedModel) -> Result<AdviceResponse, AdviceError> {
    let violations = validate_view(view);
    if !violations.is_empty() {
        return Err(AdviceError::InvalidView(violations));
    }
    let spec = live_feature_spec(&loaded.model)?;
    let canonical = view.canonicalized();
    let x = spec.featurize_view(&canonical)?;
    let scores_c = loaded.model.decision_scores(&x)?;
    let mask_c = canonical.resistance_mask();
    let target_c = masked_argmax(&scores_c, &mask_c)?;

    let offset = view.first_leader % NUM_PLAYERS;
    let original = |c: Seat| (c + offset) % NUM_PLAYERS;
    let mut order: Vec<Seat> = (0..NUM_PLAYERS).filter(|&s| mask_c[s]).collect();
    // stable sort keeps canonical order among equal scores, matching masked_argmax
    order.sort_by(|&a, &b| {
        scores_c[b]
            .partial_cmp(&scores_c[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    debug_assert_eq!(order[0], target_c);

    let mut scores = vec![0.0; NUM_PLAYERS];
    for c in 0..NUM_PLAYERS {
        scores[original(c)] = scores_c[c];
    }
    Ok(AdviceResponse {
        api_version: API_VERSION.to_string(),
        target: original(target_c),
        ranking: order
            .iter()
            .map(|&c| RankedSeat {
                seat: original(c),
                score: scores_c[c],
            })
            .collect(),
        scores,
        meta: AdviceFlags {
            no_signal: x.iter().all(|&v| v == 0.0),
            partial: view.succeeded_missions() < MISSIONS_TO_WIN,
            proposals_seen: view.proposal_count(),
        },
        model_meta: loaded.meta(),
    })
}
