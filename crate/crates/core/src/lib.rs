//! Assassination inference for 5-player The Resistance: Avalon.
//!
//! The pipeline runs from canonical game logs to a recommended shot:
//!
//! 1. [`game`]: domain types, rule validation and canonical seat ordering.
//! 2. [`ingest`]: line-delimited JSON game streams.
//! 3. [`sim`]: seeded synthetic games with tunable Merlin leakage.
//! 4. [`features`]: the general 5x5x5x4 vote tensor and the engineered statistics.
//! 5. [`svm`] and [`mlp`]: one-vs-rest classifiers trained from scratch.
//! 6. [`eval`] and [`search`]: k-fold cross-validation, baselines, error analysis
//!    and powerset feature selection.
//! 7. [`advisor`]: live advice from a partial game view.

pub mod advisor;
pub mod eval;
pub mod features;
pub mod game;
pub mod ingest;
pub mod linalg;
pub mod mlp;
pub mod model;
pub mod search;
pub mod sim;
pub mod svm;

pub use advisor::{advise, AdviceResponse, LoadedModel};
pub use eval::{cross_validate, kfold_split, EvalReport, FoldPlan};
pub use features::{FeatureSpec, StatId, StatSet};
pub use game::{AssassinView, GameLog, Role, Seat, Violation, NUM_PLAYERS};
pub use ingest::{GameStream, Strictness};
pub use linalg::Matrix;
pub use model::{predict_merlin, Classifier, Model, ModelError};
pub use sim::SimConfig;
