//! Seeded synthetic game generation.
//!
//! Each game draws from its own ChaCha stream selected by `(seed, game_index)`,
//! so any game can be regenerated on its own and generation order never
//! affects output.

use crate::game::{
    canonicalize, is_majority, Assassination, GameLog, Mission, Proposal, Role, Seat, Side, Vote,
    ALL_ROLES, MAX_PROPOSALS, MISSIONS_TO_WIN, NUM_PLAYERS, TEAM_SIZES,
};
use crate::ingest::{is_eligible, GameStream};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub num_games: usize,
    /// How often Merlin acts on spy knowledge when proposing and voting.
    pub merlin_leak: f64,
    /// Chance that a spy on an approved team plays a fail card.
    pub spy_sabotage: f64,
    /// Approval rate of players voting without information.
    pub base_approve: f64,
    pub eligible_only: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_games: 1000,
            merlin_leak: 0.5,
            spy_sabotage: 0.5,
            base_approve: 0.7,
            eligible_only: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("{name} must lie in [0, 1], got {value}")]
pub struct ConfigError {
    pub name: &'static str,
    pub value: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("merlin_leak", self.merlin_leak),
            ("spy_sabotage", self.spy_sabotage),
            ("base_approve", self.base_approve),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError { name, value });
            }
        }
        Ok(())
    }
}

fn game_rng(seed: u64, game_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(game_index);
    rng
}

fn choose_team(rng: &mut ChaCha8Rng, pool: &[Seat], size: usize) -> Vec<Seat> {
    let mut team: Vec<Seat> = pool.choose_multiple(rng, size).copied().collect();
    team.sort_unstable();
    team
}

/// Generates one raw (non-canonical) game. The result always validates.
pub fn simulate_game(config: &SimConfig, game_index: u64) -> GameLog {
    let mut rng = game_rng(config.seed, game_index);
    let mut roles = ALL_ROLES.to_vec();
    roles.shuffle(&mut rng);
    let first_leader = rng.gen_range(0..NUM_PLAYERS);

    let seats: Vec<Seat> = (0..NUM_PLAYERS).collect();
    let spies: Vec<Seat> = seats
        .iter()
        .copied()
        .filter(|&s| roles[s].is_spy())
        .collect();
    let resistance: Vec<Seat> = seats
        .iter()
        .copied()
        .filter(|&s| !roles[s].is_spy())
        .collect();

    let mut leader = first_leader;
    let mut missions = Vec::new();
    let (mut successes, mut failures) = (0, 0);
    let mut five_rejects = false;

    for (index, &team_size) in TEAM_SIZES.iter().enumerate() {
        let mut proposals = Vec::new();
        let mut outcome = None;
        for round in 0..MAX_PROPOSALS {
            let team = match roles[leader] {
                Role::Assassin | Role::Morgana => {
                    let mut team = choose_team(&mut rng, &resistance, team_size - 1);
                    team.push(leader);
                    team.sort_unstable();
                    team
                }
                Role::Merlin if rng.gen_bool(config.merlin_leak) => {
                    choose_team(&mut rng, &resistance, team_size)
                }
                _ => choose_team(&mut rng, &seats, team_size),
            };
            let dirty = team.iter().any(|s| spies.contains(s));
            let hammer = round == MAX_PROPOSALS - 1;
            let votes: Vec<Vote> = (0..NUM_PLAYERS)
                .map(|seat| {
                    let approve = if hammer {
                        true
                    } else {
                        match roles[seat] {
                            Role::Assassin | Role::Morgana => dirty,
                            Role::Merlin if rng.gen_bool(config.merlin_leak) => !dirty,
                            _ => rng.gen_bool(config.base_approve),
                        }
                    };
                    if approve {
                        Vote::Approve
                    } else {
                        Vote::Reject
                    }
                })
                .collect();
            let approvals = votes.iter().filter(|v| **v == Vote::Approve).count();
            let approved = is_majority(approvals, NUM_PLAYERS);
            if approved {
                let fails = team
                    .iter()
                    .filter(|s| spies.contains(s))
                    .filter(|_| rng.gen_bool(config.spy_sabotage))
                    .count();
                outcome = Some(fails);
            }
            proposals.push(Proposal {
                leader,
                team,
                votes,
                approved,
            });
            leader = (leader + 1) % NUM_PLAYERS;
            if approved {
                break;
            }
        }
        match outcome {
            Some(0) => successes += 1,
            Some(_) => failures += 1,
            None => five_rejects = true,
        }
        missions.push(Mission {
            index,
            team_size,
            proposals,
            fail_count: outcome,
            succeeded: outcome.map(|f| f == 0),
        });
        if successes == MISSIONS_TO_WIN || failures == MISSIONS_TO_WIN || five_rejects {
            break;
        }
    }

    let assassination = (successes == MISSIONS_TO_WIN).then(|| {
        let shooter = roles.iter().position(|r| *r == Role::Assassin).unwrap();
        let target = *resistance.choose(&mut rng).unwrap();
        Assassination {
            shooter,
            target,
            correct: roles[target] == Role::Merlin,
        }
    });
    let winner = match assassination {
        Some(a) if !a.correct => Side::Resistance,
        _ => Side::Spies,
    };

    GameLog {
        game_id: format!("sim-{}-{}", config.seed, game_index),
        num_players: NUM_PLAYERS,
        first_leader,
        roles,
        missions,
        winner,
        assassination,
    }
}

const CHUNK: usize = 256;

/// Generates `num_games` canonical games (counted after filtering when
/// `eligible_only` is set), ordered by game index.
pub fn simulate_dataset(config: &SimConfig) -> Result<GameStream, ConfigError> {
    config.validate()?;
    let mut games = Vec::with_capacity(config.num_games);
    let mut next = 0u64;
    while games.len() < config.num_games {
        let want = config.num_games - games.len();
        let chunk = if config.eligible_only {
            want.max(CHUNK)
        } else {
            want
        };
        let batch: Vec<GameLog> = (next..next + chunk as u64)
            .into_par_iter()
            .map(|i| {
                canonicalize(&simulate_game(config, i)).expect("simulator produced an invalid game")
            })
            .collect();
        next += chunk as u64;
        games.extend(
            batch
                .into_iter()
                .filter(|g| !config.eligible_only || is_eligible(g))
                .take(want),
        );
    }
    Ok(GameStream::new(
        format!("simulated(seed={})", config.seed),
        games,
    ))
}
