//! Hand-trace oracle: recounts every statistic straight from the raw JSON of
//! a canonical game, one proposal at a time.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const STATS: usize = 9;
pub const GENERAL_LEN: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedFeatures {
    pub game_id: String,
    pub label: usize,
    /// `stats[seat][k]` is statistic f{k+1}; spy rows are zero.
    pub stats: Vec<Vec<i64>>,
    /// f3 under the stricter reading: first proposal of all three resistance players.
    pub f3_full_resistance: Vec<i64>,
    /// The 500 general entries as `+`, `-` or `0`, player-major.
    pub general: String,
}

struct Prop {
    mission: usize,
    slot: usize,
    leader: usize,
    team: Vec<usize>,
    approve: Vec<bool>,
    approved: bool,
    mission_succeeded: bool,
}

fn is_spy(role: &str) -> bool {
    role == "Assassin" || role == "Morgana"
}

fn proposals(game: &Value) -> Vec<Prop> {
    let mut out = Vec::new();
    for (mi, m) in game["missions"].as_array().unwrap().iter().enumerate() {
        let props = m["proposals"].as_array().unwrap();
        for (q, p) in props.iter().enumerate() {
            let approve: Vec<bool> = p["votes"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_str().unwrap() == "Approve")
                .collect();
            // majority recounted from the votes, not read from the log
            let approved = approve.iter().filter(|&&a| a).count() >= 3;
            out.push(Prop {
                mission: mi,
                slot: q,
                leader: p["leader"].as_u64().unwrap() as usize,
                team: p["team"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|s| s.as_u64().unwrap() as usize)
                    .collect(),
                approve,
                approved,
                mission_succeeded: q + 1 == props.len() && m["succeeded"] == Value::Bool(true),
            });
        }
    }
    out
}

pub fn trace(game: &Value) -> ExpectedFeatures {
    assert_eq!(game["first_leader"], 0, "oracle expects canonical games");
    let roles: Vec<&str> = game["roles"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_str().unwrap())
        .collect();
    let spy: Vec<bool> = roles.iter().map(|r| is_spy(r)).collect();
    let label = roles.iter().position(|&r| r == "Merlin").unwrap();
    let props = proposals(game);

    let clean = |p: &Prop| p.team.iter().all(|&s| !spy[s]);
    let full_resistance = |p: &Prop| p.team.len() == 3 && clean(p);

    let first_clean_leader = props.iter().find(|p| clean(p)).map(|p| p.leader);
    let first_full_leader = props.iter().find(|p| full_resistance(p)).map(|p| p.leader);

    let mut stats = vec![vec![0i64; STATS]; 5];
    let mut f3_full = vec![0i64; 5];
    for seat in 0..5 {
        if spy[seat] {
            continue;
        }
        let row = &mut stats[seat];
        let mut first_led: Option<bool> = None;
        for p in &props {
            let on_team = p.team.contains(&seat);
            let yes = p.approve[seat];
            if (clean(p) && yes) || (!clean(p) && !yes) {
                row[0] += 1;
            }
            if p.leader == seat {
                if clean(p) {
                    row[1] += 1;
                }
                if first_led.is_none() {
                    first_led = Some(clean(p));
                }
                row[7] += 1;
            }
            if p.approved && on_team {
                row[4] += 1;
                if p.mission_succeeded {
                    row[5] += 1;
                }
            }
            if yes == p.approved {
                row[6] += 1;
            }
            if !yes && p.approved {
                row[8] += 1;
            }
        }
        row[2] = i64::from(first_clean_leader == Some(seat));
        row[3] = i64::from(first_led == Some(true));
        f3_full[seat] = i64::from(first_full_leader == Some(seat));
    }

    let mut general = vec!['0'; GENERAL_LEN];
    let sign = |b: bool| if b { '+' } else { '-' };
    for p in &props {
        #[allow(clippy::needless_range_loop)]
        for player in 0..5 {
            let base = ((player * 5 + p.mission) * 5 + p.slot) * 4;
            general[base] = sign(p.leader == player);
            general[base + 1] = sign(p.team.contains(&player));
            general[base + 2] = sign(p.approve[player]);
            general[base + 3] = sign(!spy[player]);
        }
    }

    ExpectedFeatures {
        game_id: game["game_id"].as_str().unwrap().to_string(),
        label,
        stats,
        f3_full_resistance: f3_full,
        general: general.into_iter().collect(),
    }
}

pub fn decode_general(text: &str) -> Vec<f64> {
    text.chars()
        .map(|c| match c {
            '+' => 1.0,
            '-' => -1.0,
            _ => 0.0,
        })
        .collect()
}

/// Reads the committed expectations.
pub fn load_expected(path: &std::path::Path) -> Vec<ExpectedFeatures> {
    let text = std::fs::read_to_string(path).expect("expected_features.json");
    serde_json::from_str(&text).expect("expected features parse")
}

/// Raw JSON values of every non-blank line.
pub fn load_raw_games(path: &std::path::Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .expect("fixture games")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("fixture line is JSON"))
        .collect()
}
