//! Inputs shared by the benchmarks.

use assassin_core::features::{build_dataset, Dataset};
use assassin_core::sim::{simulate_dataset, SimConfig};
use assassin_core::{FeatureSpec, GameStream};

pub fn eligible_games(games: usize, seed: u64) -> GameStream {
    simulate_dataset(&SimConfig {
        num_games: games,
        seed,
        merlin_leak: 0.5,
        eligible_only: true,
        ..SimConfig::default()
    })
    .expect("valid simulator config")
}

pub fn dataset(games: usize, seed: u64, spec: &FeatureSpec) -> Dataset {
    build_dataset(&eligible_games(games, seed), spec).expect("simulated games featurize")
}
