//! Test-only oracles shared by the integration tests and the acceptance suite.
//! Nothing here calls into the library code it is used to check.
#![allow(dead_code)]

pub mod oracle;
pub mod reference;

use std::path::PathBuf;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn fixture_games_path() -> PathBuf {
    fixtures_dir().join("games.jsonl")
}

pub fn expected_features_path() -> PathBuf {
    fixtures_dir().join("expected_features.json")
}
