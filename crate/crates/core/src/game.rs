//! Domain types and rule validation for 5-player Avalon games.
//!
//! Seats are indices `0..NUM_PLAYERS`; clockwise is ascending index modulo the
//! player count. A log is *canonical* when its first leader sits at seat 0.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub type Seat = usize;

pub const NUM_PLAYERS: usize = 5;

/// Required team size for each mission of a 5-player game.
pub const TEAM_SIZES: [usize; 5] = [2, 3, 2, 3, 3];

/// Mission wins (or losses) that end the mission phase.
pub const MISSIONS_TO_WIN: usize = 3;

/// Proposals allowed per mission before the spies win outright.
pub const MAX_PROPOSALS: usize = 5;

#[derive(Debug, Copy, Clone, Eq, PartialEq, Hash, Ord, PartialOrd, Serialize, Deserialize)]
pub enum Role {
    Merlin,
    Percival,
    LoyalServant,
    Assassin,
    Morgana,
}

pub const ALL_ROLES: [Role; NUM_PLAYERS] = [
    Role::Merlin,
    Role::Percival,
    Role::LoyalServant,
    Role::Assassin,
    Role::Morgana,
];

impl Role {
    pub fn is_spy(self) -> bool {
        matches!(self, Role::Assassin | Role::Morgana)
    }
}

#[derive(Debug, Copy, Clone, Eq, PartialEq, Hash, Serialize, Deserialize)]
pub enum Vote {
    Approve,
    Reject,
}

#[derive(Debug, Copy, Clone, Eq, PartialEq, Hash, Serialize, Deserialize)]
pub enum Side {
    Resistance,
    Spies,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub leader: Seat,
    pub team: Vec<Seat>,
    pub votes: Vec<Vote>,
    pub approved: bool,
}

impl Proposal {
    pub fn approvals(&self) -> usize {
        self.votes.iter().filter(|v| **v == Vote::Approve).count()
    }

    pub fn includes(&self, seat: Seat) -> bool {
        self.team.contains(&seat)
    }

    /// True when no member of the team is a spy.
    pub fn is_clean(&self, spy_seats: &[Seat]) -> bool {
        !self.team.iter().any(|s| spy_seats.contains(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mission {
    pub index: usize,
    pub team_size: usize,
    pub proposals: Vec<Proposal>,
    pub fail_count: Option<usize>,
    pub succeeded: Option<bool>,
}

impl Mission {
    /// The approved proposal, if the mission went ahead.
    pub fn approved_proposal(&self) -> Option<&Proposal> {
        self.proposals.iter().find(|p| p.approved)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assassination {
    pub shooter: Seat,
    pub target: Seat,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameLog {
    pub game_id: String,
    pub num_players: usize,
    pub first_leader: Seat,
    pub roles: Vec<Role>,
    pub missions: Vec<Mission>,
    pub winner: Side,
    pub assassination: Option<Assassination>,
}

impl GameLog {
    pub fn seat_of(&self, role: Role) -> Option<Seat> {
        self.roles.iter().position(|r| *r == role)
    }

    pub fn merlin_seat(&self) -> Option<Seat> {
        self.seat_of(Role::Merlin)
    }

    pub fn spy_seats(&self) -> Vec<Seat> {
        (0..self.roles.len())
            .filter(|&s| self.roles[s].is_spy())
            .collect()
    }

    pub fn succeeded_missions(&self) -> usize {
        self.missions
            .iter()
            .filter(|m| m.succeeded == Some(true))
            .count()
    }

    pub fn proposal_count(&self) -> usize {
        self.missions.iter().map(|m| m.proposals.len()).sum()
    }

    pub fn is_canonical(&self) -> bool {
        self.first_leader == 0
    }
}

/// What the Assassin legally knows at the end of (or during) a game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssassinView {
    pub spy_seats: Vec<Seat>,
    pub first_leader: Seat,
    pub missions: Vec<Mission>,
}

impl AssassinView {
    pub fn is_canonical(&self) -> bool {
        self.first_leader == 0
    }

    pub fn is_spy(&self, seat: Seat) -> bool {
        self.spy_seats.contains(&seat)
    }

    /// Seats eligible to be shot.
    pub fn resistance_mask(&self) -> [bool; NUM_PLAYERS] {
        let mut mask = [true; NUM_PLAYERS];
        for &s in &self.spy_seats {
            if s < NUM_PLAYERS {
                mask[s] = false;
            }
        }
        mask
    }

    pub fn proposal_count(&self) -> usize {
        self.missions.iter().map(|m| m.proposals.len()).sum()
    }

    pub fn succeeded_missions(&self) -> usize {
        self.missions
            .iter()
            .filter(|m| m.succeeded == Some(true))
            .count()
    }

    /// Relabels seats so that the first leader sits at seat 0.
    pub fn canonicalized(&self) -> AssassinView {
        let offset = self.first_leader % NUM_PLAYERS;
        let relabel = |s: Seat| relabel_seat(s, offset, NUM_PLAYERS);
        let mut spy_seats: Vec<Seat> = self.spy_seats.iter().map(|&s| relabel(s)).collect();
        spy_seats.sort_unstable();
        AssassinView {
            spy_seats,
            first_leader: relabel(self.first_leader),
            missions: rotate_missions(&self.missions, offset, NUM_PLAYERS),
        }
    }
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    PlayerCount,
    RoleComposition,
    SeatRange,
    SpySeats,
    MissionIndex,
    TeamSize,
    TeamDuplicate,
    VoteCount,
    MajorityRule,
    ApprovedNotLast,
    ProposalCount,
    LeaderRotation,
    MissionOutcome,
    FailCount,
    Termination,
    Winner,
    AssassinationRequired,
    AssassinationForbidden,
    ShooterRole,
    AssassinationFlag,
}

/// A broken game rule and where it was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub location: String,
    pub message: String,
}

impl Violation {
    fn new(rule: Rule, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            rule,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.rule, self.location, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("game violates {} rule(s): {}", .0.len(), summarize(.0))]
    Invalid(Vec<Violation>),
    #[error("view is not canonical (first leader at seat {0})")]
    NotCanonical(Seat),
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Whether a vote count passes. A tie rejects, which only matters for an
/// even number of voters.
pub fn is_majority(approvals: usize, voters: usize) -> bool {
    approvals * 2 > voters
}

#[derive(Debug, Default)]
struct HistorySummary {
    successes: usize,
    failures: usize,
    five_rejects: bool,
}

impl HistorySummary {
    fn terminated(&self) -> bool {
        self.successes >= MISSIONS_TO_WIN || self.failures >= MISSIONS_TO_WIN || self.five_rejects
    }
}

/// Checks mission/proposal history. `complete` demands that the history ends
/// on a termination condition; otherwise the last mission may be in progress.
fn check_history(
    missions: &[Mission],
    first_leader: Seat,
    spy_seats: Option<&[Seat]>,
    complete: bool,
    out: &mut Vec<Violation>,
) -> HistorySummary {
    let n = NUM_PLAYERS;
    let mut summary = HistorySummary::default();
    let mut expected_leader = first_leader % n;

    for (pos, mission) in missions.iter().enumerate() {
        let mloc = format!("missions[{pos}]");
        if summary.terminated() {
            out.push(Violation::new(
                Rule::Termination,
                &mloc,
                "mission recorded after the game had already ended",
            ));
            continue;
        }
        if mission.index != pos {
            out.push(Violation::new(
                Rule::MissionIndex,
                &mloc,
                format!("index {} but position {pos}", mission.index),
            ));
        }
        if let Some(&required) = TEAM_SIZES.get(pos) {
            if mission.team_size != required {
                out.push(Violation::new(
                    Rule::TeamSize,
                    &mloc,
                    format!(
                        "mission team_size {} but rules require {required}",
                        mission.team_size
                    ),
                ));
            }
        }
        if mission.proposals.is_empty() || mission.proposals.len() > MAX_PROPOSALS {
            let last_in_progress =
                !complete && pos + 1 == missions.len() && mission.proposals.is_empty();
            if !last_in_progress {
                out.push(Violation::new(
                    Rule::ProposalCount,
                    &mloc,
                    format!(
                        "{} proposals (allowed 1 to {MAX_PROPOSALS})",
                        mission.proposals.len()
                    ),
                ));
            }
        }

        let last = mission.proposals.len().saturating_sub(1);
        for (j, p) in mission.proposals.iter().enumerate() {
            let ploc = format!("{mloc}.proposals[{j}]");
            if p.leader != expected_leader {
                out.push(Violation::new(
                    Rule::LeaderRotation,
                    &ploc,
                    format!("leader {} but rotation expects {expected_leader}", p.leader),
                ));
            }
            expected_leader = (expected_leader + 1) % n;
            if p.leader >= n {
                out.push(Violation::new(
                    Rule::SeatRange,
                    &ploc,
                    format!("leader {} out of range", p.leader),
                ));
            }
            if p.team.len() != mission.team_size {
                out.push(Violation::new(
                    Rule::TeamSize,
                    &ploc,
                    format!(
                        "team of {} on a size-{} mission",
                        p.team.len(),
                        mission.team_size
                    ),
                ));
            }
            for (t, &s) in p.team.iter().enumerate() {
                if s >= n {
                    out.push(Violation::new(
                        Rule::SeatRange,
                        &ploc,
                        format!("team seat {s} out of range"),
                    ));
                }
                if p.team[..t].contains(&s) {
                    out.push(Violation::new(
                        Rule::TeamDuplicate,
                        &ploc,
                        format!("seat {s} listed twice"),
                    ));
                }
            }
            if p.votes.len() != n {
                out.push(Violation::new(
                    Rule::VoteCount,
                    &ploc,
                    format!("{} votes for {n} players", p.votes.len()),
                ));
            } else {
                let approvals = p.approvals();
                let majority = is_majority(approvals, n);
                if p.approved != majority {
                    let detail = if approvals * 2 == n {
                        " (tie rejects)"
                    } else {
                        ""
                    };
                    out.push(Violation::new(
                        Rule::MajorityRule,
                        &ploc,
                        format!(
                            "{approvals} of {n} approvals but approved={}{detail}",
                            p.approved
                        ),
                    ));
                }
            }
            if p.approved && j != last {
                out.push(Violation::new(
                    Rule::ApprovedNotLast,
                    &ploc,
                    "approved proposal is followed by further proposals",
                ));
            }
        }

        let approved = mission.proposals.last().filter(|p| p.approved);
        match approved {
            Some(p) => match (mission.fail_count, mission.succeeded) {
                (Some(fails), Some(ok)) => {
                    if ok != (fails == 0) {
                        out.push(Violation::new(
                            Rule::MissionOutcome,
                            &mloc,
                            format!("succeeded={ok} with {fails} fail card(s)"),
                        ));
                    }
                    let spies_on_team =
                        spy_seats.map(|spies| p.team.iter().filter(|s| spies.contains(s)).count());
                    if fails > p.team.len() || spies_on_team.is_some_and(|c| fails > c) {
                        out.push(Violation::new(
                            Rule::FailCount,
                            &mloc,
                            format!("{fails} fail card(s) exceed the spies on the team"),
                        ));
                    }
                    if fails == 0 {
                        summary.successes += 1;
                    } else {
                        summary.failures += 1;
                    }
                }
                _ => out.push(Violation::new(
                    Rule::MissionOutcome,
                    &mloc,
                    "approved mission must record fail_count and succeeded",
                )),
            },
            None => {
                if mission.fail_count.is_some() || mission.succeeded.is_some() {
                    out.push(Violation::new(
                        Rule::MissionOutcome,
                        &mloc,
                        "mission without an approved team cannot have an outcome",
                    ));
                }
                if mission.proposals.len() == MAX_PROPOSALS {
                    summary.five_rejects = true;
                } else if complete || pos + 1 != missions.len() {
                    out.push(Violation::new(
                        Rule::Termination,
                        &mloc,
                        "mission ended without an approved team or five rejections",
                    ));
                }
            }
        }
    }

    if complete && !summary.terminated() {
        out.push(Violation::new(
            Rule::Termination,
            "missions",
            format!(
                "history ends at {} success(es), {} failure(s) without a termination condition",
                summary.successes, summary.failures
            ),
        ));
    }
    summary
}

/// Returns every rule violation in a complete game log. An empty list means
/// the log is valid.
pub fn validate_game(log: &GameLog) -> Vec<Violation> {
    let n = NUM_PLAYERS;
    let mut out = Vec::new();
    if log.num_players != n {
        out.push(Violation::new(
            Rule::PlayerCount,
            "num_players",
            format!(
                "{} players; only {n}-player games are supported",
                log.num_players
            ),
        ));
        return out;
    }
    if log.first_leader >= n {
        out.push(Violation::new(
            Rule::SeatRange,
            "first_leader",
            format!("seat {} out of range", log.first_leader),
        ));
    }
    let roles_ok = log.roles.len() == n && ALL_ROLES.iter().all(|r| log.roles.contains(r));
    if !roles_ok {
        out.push(Violation::new(
            Rule::RoleComposition,
            "roles",
            "exactly one of each role is required",
        ));
    }
    let spies = roles_ok.then(|| log.spy_seats());
    let summary = check_history(
        &log.missions,
        log.first_leader,
        spies.as_deref(),
        true,
        &mut out,
    );

    if summary.successes >= MISSIONS_TO_WIN {
        match &log.assassination {
            None => out.push(Violation::new(
                Rule::AssassinationRequired,
                "assassination",
                "three missions succeeded but no assassination was recorded",
            )),
            Some(a) => {
                if a.shooter >= n || a.target >= n {
                    out.push(Violation::new(
                        Rule::SeatRange,
                        "assassination",
                        "seat out of range",
                    ));
                } else if roles_ok {
                    if log.roles[a.shooter] != Role::Assassin {
                        out.push(Violation::new(
                            Rule::ShooterRole,
                            "assassination.shooter",
                            format!(
                                "seat {} is {:?}, not the Assassin",
                                a.shooter, log.roles[a.shooter]
                            ),
                        ));
                    }
                    let hit = log.roles[a.target] == Role::Merlin;
                    if a.correct != hit {
                        out.push(Violation::new(
                            Rule::AssassinationFlag,
                            "assassination.correct",
                            format!(
                                "correct={} but target seat {} is {:?}",
                                a.correct, a.target, log.roles[a.target]
                            ),
                        ));
                    }
                }
            }
        }
    } else if log.assassination.is_some() {
        out.push(Violation::new(
            Rule::AssassinationForbidden,
            "assassination",
            "assassination recorded without three successful missions",
        ));
    }

    let expected = if summary.five_rejects || summary.failures >= MISSIONS_TO_WIN {
        Some(Side::Spies)
    } else if summary.successes >= MISSIONS_TO_WIN {
        log.assassination.map(|a| {
            if a.correct {
                Side::Spies
            } else {
                Side::Resistance
            }
        })
    } else {
        None
    };
    if let Some(side) = expected {
        if side != log.winner {
            out.push(Violation::new(
                Rule::Winner,
                "winner",
                format!("winner {:?} but the history implies {:?}", log.winner, side),
            ));
        }
    }
    out
}

/// Validates a possibly in-progress Assassin view.
pub fn validate_view(view: &AssassinView) -> Vec<Violation> {
    let n = NUM_PLAYERS;
    let mut out = Vec::new();
    let mut distinct = view.spy_seats.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if view.spy_seats.len() != 2 || distinct.len() != 2 || distinct.iter().any(|&s| s >= n) {
        out.push(Violation::new(
            Rule::SpySeats,
            "spy_seats",
            format!(
                "expected exactly 2 distinct spy seats in 0..{n}, got {:?}",
                view.spy_seats
            ),
        ));
    }
    if view.first_leader >= n {
        out.push(Violation::new(
            Rule::SeatRange,
            "first_leader",
            format!("seat {} out of range", view.first_leader),
        ));
    }
    let spies = (out.is_empty()).then_some(view.spy_seats.as_slice());
    check_history(&view.missions, view.first_leader, spies, false, &mut out);
    out
}

fn relabel_seat(seat: Seat, offset: usize, n: usize) -> Seat {
    if seat < n {
        (seat + n - offset) % n
    } else {
        seat
    }
}

fn rotate_missions(missions: &[Mission], offset: usize, n: usize) -> Vec<Mission> {
    let relabel = |s: Seat| relabel_seat(s, offset, n);
    missions
        .iter()
        .map(|m| Mission {
            proposals: m
                .proposals
                .iter()
                .map(|p| Proposal {
                    leader: relabel(p.leader),
                    team: p.team.iter().map(|&s| relabel(s)).collect(),
                    votes: rotate_vec(&p.votes, offset, n),
                    approved: p.approved,
                })
                .collect(),
            ..m.clone()
        })
        .collect()
}

fn rotate_vec<T: Clone>(items: &[T], offset: usize, n: usize) -> Vec<T> {
    if items.len() != n {
        return items.to_vec();
    }
    (0..n)
        .map(|new| items[(new + offset) % n].clone())
        .collect()
}

/// Relabels every seat reference so that seat `offset` becomes seat 0,
/// preserving clockwise order. Does not validate; out-of-range seats are kept.
pub fn rotate_seats(log: &GameLog, offset: usize) -> GameLog {
    let n = NUM_PLAYERS;
    let offset = offset % n;
    let relabel = |s: Seat| relabel_seat(s, offset, n);
    GameLog {
        game_id: log.game_id.clone(),
        num_players: log.num_players,
        first_leader: relabel(log.first_leader),
        roles: rotate_vec(&log.roles, offset, n),
        missions: rotate_missions(&log.missions, offset, n),
        winner: log.winner,
        assassination: log.assassination.map(|a| Assassination {
            shooter: relabel(a.shooter),
            target: relabel(a.target),
            correct: a.correct,
        }),
    }
}

/// Relabels seats so the first leader is seat 0. Rejects invalid logs.
pub fn canonicalize(log: &GameLog) -> Result<GameLog, GameError> {
    let violations = validate_game(log);
    if !violations.is_empty() {
        return Err(GameError::Invalid(violations));
    }
    Ok(rotate_seats(log, log.first_leader))
}

/// Projects a log onto the Assassin's information set: spy identities plus
/// the public mission and vote history.
pub fn assassin_view(log: &GameLog) -> AssassinView {
    AssassinView {
        spy_seats: log.spy_seats(),
        first_leader: log.first_leader,
        missions: log.missions.clone(),
    }
}
