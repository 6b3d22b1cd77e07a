//! Trained classifiers, Merlin prediction and the versioned model file.

use crate::features::FeatureSpec;
use crate::game::{Seat, NUM_PLAYERS};
use crate::mlp::MlpModel;
use crate::svm::{KernelSvcModel, LinearSvcModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

pub type Scores = [f64; NUM_PLAYERS];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("C must be positive, got {0}")]
    NonPositiveC(f64),
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("resistance mask must have exactly 3 seats, got {0}")]
    BadMask(usize),
    #[error("label {0} is not a seat")]
    BadLabel(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Identifies the features a model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub id: String,
    pub dim: usize,
    pub spec: Option<FeatureSpec>,
}

impl FeatureSchema {
    /// Plain numeric input with no game featurizer attached.
    pub fn raw(dim: usize) -> Self {
        Self {
            id: "raw".to_string(),
            dim,
            spec: None,
        }
    }

    pub fn from_spec(spec: FeatureSpec) -> Self {
        let id = match spec {
            FeatureSpec::Engineered { subset, .. } => format!("engineered:{subset}"),
            FeatureSpec::General => "general".to_string(),
        };
        Self {
            id,
            dim: spec.dim(),
            spec: Some(spec),
        }
    }
}

/// Anything that scores the five seats of a game.
pub trait Classifier: Send + Sync {
    fn decision_scores(&self, x: &[f64]) -> Result<Scores, ModelError>;
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<(), ModelError> {
    if x.len() != expected {
        return Err(ModelError::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

/// Highest-scoring seat among those allowed by the mask; ties go to the lowest seat.
pub fn masked_argmax(scores: &Scores, mask: &[bool; NUM_PLAYERS]) -> Result<Seat, ModelError> {
    let allowed = mask.iter().filter(|&&m| m).count();
    if allowed != 3 {
        return Err(ModelError::BadMask(allowed));
    }
    let mut best: Option<Seat> = None;
    for seat in (0..NUM_PLAYERS).filter(|&s| mask[s]) {
        match best {
            Some(b)
                if scores[seat].partial_cmp(&scores[b]) != Some(std::cmp::Ordering::Greater) => {}
            _ => best = Some(seat),
        }
    }
    Ok(best.expect("mask has allowed seats"))
}

/// Predicts Merlin's seat, never choosing a seat outside the resistance mask.
pub fn predict_merlin<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    resistance_mask: &[bool; NUM_PLAYERS],
) -> Result<Seat, ModelError> {
    masked_argmax(&model.decision_scores(x)?, resistance_mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type")]
pub enum Model {
    #[serde(rename = "linear-svc")]
    LinearSvc(LinearSvcModel),
    #[serde(rename = "rbf-svc")]
    RbfSvc(KernelSvcModel),
    #[serde(rename = "mlp")]
    Mlp(MlpModel),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: Model,
}

impl Model {
    pub fn model_type(&self) -> &'static str {
        match self {
            Model::LinearSvc(_) => "linear-svc",
            Model::RbfSvc(_) => "rbf-svc",
            Model::Mlp(_) => "mlp",
        }
    }

    pub fn feature_schema(&self) -> &FeatureSchema {
        match self {
            Model::LinearSvc(m) => &m.feature_schema,
            Model::RbfSvc(m) => &m.feature_schema,
            Model::Mlp(m) => &m.feature_schema,
        }
    }

    pub fn set_feature_schema(&mut self, schema: FeatureSchema) {
        match self {
            Model::LinearSvc(m) => m.feature_schema = schema,
            Model::RbfSvc(m) => m.feature_schema = schema,
            Model::Mlp(m) => m.feature_schema = schema,
        }
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            model: self.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Model, ModelError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(file.format_version));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<String, ModelError> {
        let text = self.to_json()?;
        std::fs::write(path, &text)?;
        Ok(checksum(text.as_bytes()))
    }

    /// Loads a model file and returns it with the SHA-256 of its bytes.
    pub fn load(path: &Path) -> Result<(Model, String), ModelError> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok((Model::from_json(&text)?, checksum(text.as_bytes())))
    }
}

impl Classifier for Model {
    fn decision_scores(&self, x: &[f64]) -> Result<Scores, ModelError> {
        match self {
            Model::LinearSvc(m) => m.decision_scores(x),
            Model::RbfSvc(m) => m.decision_scores(x),
            Model::Mlp(m) => m.decision_scores(x),
        }
    }
}

pub fn checksum(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
