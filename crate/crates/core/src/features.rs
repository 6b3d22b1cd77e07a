//! Feature encodings of a game for the Merlin classifiers.
//!
//! * **General**: a `5 x 5 x 5 x 4` tensor (player, mission, proposal, channel)
//!   with entries in `{-1, 0, +1}`; slots for proposals that never happened are 0.
//! * **Engineered**: per-seat vote-history statistics from a catalog of nine,
//!   with every statistic forced to 0 at spy seats.
//!
//! Both are computed on canonical seat order (first leader at seat 0).

use crate::game::{validate_game, AssassinView, GameLog, Role, Seat, Vote, NUM_PLAYERS};
use crate::ingest::GameStream;
use crate::linalg::Matrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use thiserror::Error;

pub const MISSION_SLOTS: usize = 5;
pub const PROPOSAL_SLOTS: usize = 5;
pub const CHANNELS: usize = 4;
pub const GENERAL_DIM: usize = NUM_PLAYERS * MISSION_SLOTS * PROPOSAL_SLOTS * CHANNELS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("feature subset is empty")]
    EmptySubset,
    #[error("unknown statistic id `{0}` (expected f1..f9)")]
    UnknownStat(String),
    #[error("input is not canonical: first leader at seat {0}")]
    NotCanonical(Seat),
    #[error("game log is invalid: {0}")]
    InvalidGame(String),
    #[error("game has no Merlin")]
    MissingLabel,
}

/// Per-player statistics derived from the public vote history.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatId {
    /// Approvals of clean teams plus rejections of dirty ones.
    CorrectVotes,
    /// Proposals led with a clean team.
    CorrectProposals,
    /// Led the first clean proposal of the game.
    FirstCleanProposal,
    /// Led at least once and the first proposal led was clean.
    FirstPickCorrect,
    /// Approved proposals whose team included the player.
    ApprovedMembership,
    /// Successful missions the player went on.
    SuccessfulMissions,
    /// Votes matching the proposal's outcome.
    MajorityVotes,
    /// Proposals led.
    Leaderships,
    /// Rejections of proposals that were approved anyway.
    OverruledRejects,
}

pub const STAT_COUNT: usize = 9;

impl StatId {
    pub const ALL: [StatId; STAT_COUNT] = [
        StatId::CorrectVotes,
        StatId::CorrectProposals,
        StatId::FirstCleanProposal,
        StatId::FirstPickCorrect,
        StatId::ApprovedMembership,
        StatId::SuccessfulMissions,
        StatId::MajorityVotes,
        StatId::Leaderships,
        StatId::OverruledRejects,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn id(self) -> &'static str {
        ["f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9"][self.index()]
    }
}

impl fmt::Display for StatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for StatId {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StatId::ALL
            .into_iter()
            .find(|st| st.id() == s.trim())
            .ok_or_else(|| FeatureError::UnknownStat(s.to_string()))
    }
}

/// A set of statistic ids, iterated in catalog order.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash, Default)]
pub struct StatSet(u16);

impl StatSet {
    pub const FULL: StatSet = StatSet((1 << STAT_COUNT) - 1);

    /// f1..f4, the default subset.
    pub fn default_subset() -> Self {
        StatSet(0b1111)
    }

    pub fn from_bits(bits: u16) -> Self {
        StatSet(bits & Self::FULL.0)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, stat: StatId) -> bool {
        self.0 & (1 << stat.index()) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = StatId> {
        StatId::ALL
            .into_iter()
            .filter(move |s| self.contains(s.to_owned()))
    }

    pub fn is_subset_of(self, other: StatSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Every non-empty subset, in increasing bit order.
    pub fn non_empty_subsets(self) -> Vec<StatSet> {
        let mut out = Vec::new();
        let mut sub = self.0;
        while sub != 0 {
            out.push(StatSet(sub));
            sub = (sub - 1) & self.0;
        }
        out.reverse();
        out
    }
}

impl FromIterator<StatId> for StatSet {
    fn from_iter<I: IntoIterator<Item = StatId>>(iter: I) -> Self {
        StatSet(iter.into_iter().fold(0, |acc, s| acc | (1 << s.index())))
    }
}

impl fmt::Display for StatSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.iter().map(StatId::id).collect();
        f.write_str(&ids.join(","))
    }
}

impl FromStr for StatSet {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let set = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(StatId::from_str)
            .collect::<Result<StatSet, _>>()?;
        if set.is_empty() {
            return Err(FeatureError::EmptySubset);
        }
        Ok(set)
    }
}

impl Serialize for StatSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(StatId::id))
    }
}

impl<'de> Deserialize<'de> for StatSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<String>::deserialize(deserializer)?;
        ids.iter()
            .map(|s| s.parse::<StatId>())
            .collect::<Result<StatSet, _>>()
            .map_err(serde::de::Error::custom)
    }
}

/// How the first-clean-proposal statistic recognises an "entirely correct" team.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CleanTeamRule {
    /// Any team without spies.
    #[default]
    NoSpies,
    /// Only a team of all three resistance players.
    FullResistance,
}

/// All nine statistics for all five seats.
pub type StatTable = [[f64; STAT_COUNT]; NUM_PLAYERS];

/// Computes the full statistic table for a canonical view.
pub fn stat_table(view: &AssassinView, rule: CleanTeamRule) -> Result<StatTable, FeatureError> {
    if !view.is_canonical() {
        return Err(FeatureError::NotCanonical(view.first_leader));
    }
    use StatId::*;
    let spies = &view.spy_seats;
    let mut t = [[0.0; STAT_COUNT]; NUM_PLAYERS];
    let mut first_clean_seen = false;
    let mut has_led = [false; NUM_PLAYERS];

    for mission in &view.missions {
        let mission_ok = mission.succeeded == Some(true);
        for p in &mission.proposals {
            let clean = p.is_clean(spies);
            let entirely_correct = match rule {
                CleanTeamRule::NoSpies => clean,
                CleanTeamRule::FullResistance => clean && p.team.len() == NUM_PLAYERS - spies.len(),
            };
            if p.leader < NUM_PLAYERS {
                let row = &mut t[p.leader];
                row[Leaderships.index()] += 1.0;
                if clean {
                    row[CorrectProposals.index()] += 1.0;
                }
                if !has_led[p.leader] {
                    has_led[p.leader] = true;
                    if clean {
                        row[FirstPickCorrect.index()] = 1.0;
                    }
                }
                if entirely_correct && !first_clean_seen {
                    row[FirstCleanProposal.index()] = 1.0;
                }
            }
            if entirely_correct {
                first_clean_seen = true;
            }
            for (seat, vote) in p.votes.iter().enumerate().take(NUM_PLAYERS) {
                let row = &mut t[seat];
                let approve = *vote == Vote::Approve;
                if approve == clean {
                    row[CorrectVotes.index()] += 1.0;
                }
                if approve == p.approved {
                    row[MajorityVotes.index()] += 1.0;
                }
                if !approve && p.approved {
                    row[OverruledRejects.index()] += 1.0;
                }
            }
            if p.approved {
                for &seat in p.team.iter().filter(|&&s| s < NUM_PLAYERS) {
                    t[seat][ApprovedMembership.index()] += 1.0;
                    if mission_ok {
                        t[seat][SuccessfulMissions.index()] += 1.0;
                    }
                }
            }
        }
    }
    for &s in spies.iter().filter(|&&s| s < NUM_PLAYERS) {
        t[s] = [0.0; STAT_COUNT];
    }
    Ok(t)
}

/// One engineered statistic for one seat.
pub fn engineered_stat(view: &AssassinView, seat: Seat, stat: StatId) -> Result<f64, FeatureError> {
    Ok(stat_table(view, CleanTeamRule::default())?[seat][stat.index()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineeredFeatures {
    pub values: Vec<f64>,
    pub label: Option<Seat>,
    pub subset: StatSet,
}

fn assemble(table: &StatTable, subset: StatSet) -> Vec<f64> {
    table
        .iter()
        .flat_map(|row| subset.iter().map(move |s| row[s.index()]))
        .collect()
}

/// Seat-major engineered vector for a canonical view (no label).
pub fn engineered_features(
    view: &AssassinView,
    subset: StatSet,
) -> Result<EngineeredFeatures, FeatureError> {
    engineered_features_with(view, subset, CleanTeamRule::default())
}

pub fn engineered_features_with(
    view: &AssassinView,
    subset: StatSet,
    rule: CleanTeamRule,
) -> Result<EngineeredFeatures, FeatureError> {
    if subset.is_empty() {
        return Err(FeatureError::EmptySubset);
    }
    let table = stat_table(view, rule)?;
    Ok(EngineeredFeatures {
        values: assemble(&table, subset),
        label: None,
        subset,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralFeatures {
    pub values: Vec<f64>,
    pub label: Option<Seat>,
}

pub fn general_index(player: usize, mission: usize, proposal: usize, channel: usize) -> usize {
    ((player * MISSION_SLOTS + mission) * PROPOSAL_SLOTS + proposal) * CHANNELS + channel
}

fn sign(b: bool) -> f64 {
    if b {
        1.0
    } else {
        -1.0
    }
}

/// General tensor from a canonical view; the resistance channel comes from
/// the spy flags.
pub fn general_features_from_view(view: &AssassinView) -> Result<GeneralFeatures, FeatureError> {
    if !view.is_canonical() {
        return Err(FeatureError::NotCanonical(view.first_leader));
    }
    let mut values = vec![0.0; GENERAL_DIM];
    for (m, mission) in view.missions.iter().enumerate().take(MISSION_SLOTS) {
        for (j, p) in mission.proposals.iter().enumerate().take(PROPOSAL_SLOTS) {
            for player in 0..NUM_PLAYERS {
                let vote = p
                    .votes
                    .get(player)
                    .map_or(0.0, |v| sign(*v == Vote::Approve));
                let cells = [
                    sign(p.leader == player),
                    sign(p.includes(player)),
                    vote,
                    sign(!view.is_spy(player)),
                ];
                let base = general_index(player, m, j, 0);
                values[base..base + CHANNELS].copy_from_slice(&cells);
            }
        }
    }
    Ok(GeneralFeatures {
        values,
        label: None,
    })
}

fn check_log(log: &GameLog) -> Result<Seat, FeatureError> {
    let violations = validate_game(log);
    if let Some(v) = violations.first() {
        return Err(FeatureError::InvalidGame(v.to_string()));
    }
    if !log.is_canonical() {
        return Err(FeatureError::NotCanonical(log.first_leader));
    }
    log.merlin_seat().ok_or(FeatureError::MissingLabel)
}

/// General tensor and Merlin label for a canonical, valid log.
pub fn general_features(log: &GameLog) -> Result<GeneralFeatures, FeatureError> {
    let label = check_log(log)?;
    let mut f = general_features_from_view(&crate::game::assassin_view(log))?;
    f.label = Some(label);
    Ok(f)
}

/// Engineered vector and Merlin label for a canonical, valid log.
pub fn engineered_features_for_log(
    log: &GameLog,
    subset: StatSet,
    rule: CleanTeamRule,
) -> Result<EngineeredFeatures, FeatureError> {
    let label = check_log(log)?;
    let mut f = engineered_features_with(&crate::game::assassin_view(log), subset, rule)?;
    f.label = Some(label);
    Ok(f)
}

/// Which encoding a model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureSpec {
    Engineered {
        subset: StatSet,
        #[serde(default)]
        clean_rule: CleanTeamRule,
    },
    General,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec::Engineered {
            subset: StatSet::default_subset(),
            clean_rule: CleanTeamRule::default(),
        }
    }
}

impl FeatureSpec {
    pub fn dim(&self) -> usize {
        match self {
            FeatureSpec::Engineered { subset, .. } => NUM_PLAYERS * subset.len(),
            FeatureSpec::General => GENERAL_DIM,
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        match self {
            FeatureSpec::Engineered { subset, .. } => (0..NUM_PLAYERS)
                .flat_map(|seat| subset.iter().map(move |s| format!("s{seat}_{s}")))
                .collect(),
            FeatureSpec::General => {
                let mut names = Vec::with_capacity(GENERAL_DIM);
                for p in 0..NUM_PLAYERS {
                    for m in 0..MISSION_SLOTS {
                        for q in 0..PROPOSAL_SLOTS {
                            for c in 0..CHANNELS {
                                names.push(format!("p{p}_m{m}_q{q}_c{c}"));
                            }
                        }
                    }
                }
                names
            }
        }
    }

    /// Features for a canonical view.
    pub fn featurize_view(&self, view: &AssassinView) -> Result<Vec<f64>, FeatureError> {
        match *self {
            FeatureSpec::Engineered { subset, clean_rule } => {
                Ok(engineered_features_with(view, subset, clean_rule)?.values)
            }
            FeatureSpec::General => Ok(general_features_from_view(view)?.values),
        }
    }

    /// Features and label for a canonical, valid log.
    pub fn featurize_log(&self, log: &GameLog) -> Result<(Vec<f64>, Seat), FeatureError> {
        let label = check_log(log)?;
        Ok((
            self.featurize_view(&crate::game::assassin_view(log))?,
            label,
        ))
    }
}

/// Feature matrix plus everything evaluation needs per game.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub labels: Vec<Seat>,
    pub masks: Vec<[bool; NUM_PLAYERS]>,
    pub roles: Vec<Vec<Role>>,
    pub human_targets: Vec<Option<Seat>>,
    pub game_ids: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            masks: idx.iter().map(|&i| self.masks[i]).collect(),
            roles: idx.iter().map(|&i| self.roles[i].clone()).collect(),
            human_targets: idx.iter().map(|&i| self.human_targets[i]).collect(),
            game_ids: idx.iter().map(|&i| self.game_ids[i].clone()).collect(),
        }
    }

    pub fn with_features(&self, x: Matrix) -> Dataset {
        assert_eq!(x.rows(), self.len());
        Dataset { x, ..self.clone() }
    }
}

/// Featurizes every game of a stream.
pub fn build_dataset(stream: &GameStream, spec: &FeatureSpec) -> Result<Dataset, FeatureError> {
    let mut rows = Vec::with_capacity(stream.len());
    let mut ds = Dataset {
        x: Matrix::zeros(0, spec.dim()),
        labels: Vec::new(),
        masks: Vec::new(),
        roles: Vec::new(),
        human_targets: Vec::new(),
        game_ids: Vec::new(),
    };
    for log in &stream.games {
        let (x, label) = spec.featurize_log(log)?;
        rows.push(x);
        ds.labels.push(label);
        ds.masks
            .push(crate::game::assassin_view(log).resistance_mask());
        ds.roles.push(log.roles.clone());
        ds.human_targets.push(log.assassination.map(|a| a.target));
        ds.game_ids.push(log.game_id.clone());
    }
    ds.x = if rows.is_empty() {
        Matrix::zeros(0, spec.dim())
    } else {
        Matrix::from_rows(&rows).expect("featurizer produced ragged rows")
    };
    Ok(ds)
}

/// Writes a feature matrix as CSV: one game per row, label column last.
pub fn write_feature_csv<W: Write>(ds: &Dataset, spec: &FeatureSpec, dest: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(dest);
    let mut header = spec.column_names();
    header.insert(0, "game_id".to_string());
    header.push("label".to_string());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut record = Vec::with_capacity(header.len());
        record.push(ds.game_ids[i].clone());
        record.extend(ds.x.row(i).iter().map(|v| format!("{v}")));
        record.push(ds.labels[i].to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
