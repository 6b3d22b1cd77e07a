use assassin_core::features::{
    engineered_features, general_features, general_index, stat_table, CleanTeamRule, FeatureSpec,
    StatSet, CHANNELS, GENERAL_DIM,
};
use assassin_core::game::{assassin_view, canonicalize, rotate_seats, AssassinView, GameLog, Vote};
use assassin_core::sim::{simulate_game, SimConfig};
use proptest::prelude::*;

fn canonical_game() -> impl Strategy<Value = GameLog> {
    (any::<u64>(), 0.0..=1.0f64, 0.0..=1.0f64, 0u64..10_000).prop_map(
        |(seed, leak, sabotage, idx)| {
            let config = SimConfig {
                seed,
                merlin_leak: leak,
                spy_sabotage: sabotage,
                ..SimConfig::default()
            };
            canonicalize(&simulate_game(&config, idx)).unwrap()
        },
    )
}

fn subset() -> impl Strategy<Value = StatSet> {
    (1u16..512).prop_map(StatSet::from_bits)
}

/// Brute-force per-seat recounts used by the cross-stat identities.
struct Recount {
    dirty_led: [f64; 5],
    approvals_on_rejected: [f64; 5],
    proposals: f64,
}

fn recount(log: &GameLog) -> Recount {
    let spies = log.spy_seats();
    let mut r = Recount {
        dirty_led: [0.0; 5],
        approvals_on_rejected: [0.0; 5],
        proposals: 0.0,
    };
    for p in log.missions.iter().flat_map(|m| &m.proposals) {
        r.proposals += 1.0;
        if p.team.iter().any(|s| spies.contains(s)) {
            r.dirty_led[p.leader] += 1.0;
        }
        for (seat, v) in p.votes.iter().enumerate() {
            if !p.approved && *v == Vote::Approve {
                r.approvals_on_rejected[seat] += 1.0;
            }
        }
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn spy_seats_are_zero(log in canonical_game(), s in subset()) {
        let f = engineered_features(&assassin_view(&log), s).unwrap();
        let k = s.len();
        for spy in log.spy_seats() {
            prop_assert!(f.values[spy * k..(spy + 1) * k].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rotation_equivariance(log in canonical_game(), offset in 1usize..5, s in subset()) {
        let raw = rotate_seats(&log, offset);
        prop_assert_ne!(raw.first_leader, 0);
        let back = canonicalize(&raw).unwrap();
        let spec = FeatureSpec::Engineered { subset: s, clean_rule: CleanTeamRule::NoSpies };
        prop_assert_eq!(spec.featurize_log(&back).unwrap(), spec.featurize_log(&log).unwrap());
        prop_assert_eq!(
            FeatureSpec::General.featurize_log(&back).unwrap(),
            FeatureSpec::General.featurize_log(&log).unwrap()
        );
    }

    #[test]
    fn cross_stat_identities(log in canonical_game()) {
        let t = stat_table(&assassin_view(&log), CleanTeamRule::NoSpies).unwrap();
        let r = recount(&log);
        let spies = log.spy_seats();
        for seat in (0..5).filter(|s| !spies.contains(s)) {
            let f = &t[seat];
            // f8 = f2 + dirty proposals led
            prop_assert_eq!(f[7], f[1] + r.dirty_led[seat]);
            // f5 >= f6
            prop_assert!(f[4] >= f[5]);
            // f7 + f9 + approvals on rejected proposals = all proposals
            prop_assert_eq!(f[6] + f[8] + r.approvals_on_rejected[seat], r.proposals);
            // flags are 0/1 and f3 has a single owner
            prop_assert!(f[2] == 0.0 || f[2] == 1.0);
            prop_assert!(f[3] == 0.0 || f[3] == 1.0);
        }
        prop_assert!(t.iter().map(|row| row[2]).sum::<f64>() <= 1.0);
    }

    #[test]
    fn view_and_log_agree(log in canonical_game(), s in subset()) {
        let spec = FeatureSpec::Engineered { subset: s, clean_rule: CleanTeamRule::NoSpies };
        let (from_log, _) = spec.featurize_log(&log).unwrap();
        prop_assert_eq!(spec.featurize_view(&assassin_view(&log)).unwrap(), from_log);
    }

    #[test]
    fn general_tensor_structure(log in canonical_game()) {
        let g = general_features(&log).unwrap();
        prop_assert_eq!(g.values.len(), GENERAL_DIM);
        for m in 0..5 {
            for q in 0..5 {
                let occurred = log.missions.get(m).is_some_and(|mm| q < mm.proposals.len());
                let resistance: f64 = (0..5).map(|p| g.values[general_index(p, m, q, 3)]).sum();
                for p in 0..5 {
                    for c in 0..CHANNELS {
                        let v = g.values[general_index(p, m, q, c)];
                        if occurred {
                            prop_assert!(v == 1.0 || v == -1.0);
                        } else {
                            prop_assert_eq!(v, 0.0);
                        }
                    }
                }
                // three +1 and two -1 give a sum of 1
                prop_assert_eq!(resistance, if occurred { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn truncated_views_featurize(log in canonical_game(), keep in 0usize..5) {
        let view = AssassinView {
            spy_seats: log.spy_seats(),
            first_leader: 0,
            missions: log.missions.iter().take(keep).cloned().collect(),
        };
        let f = engineered_features(&view, StatSet::FULL).unwrap();
        prop_assert_eq!(f.values.len(), 45);
        if keep == 0 {
            prop_assert!(f.values.iter().all(|&v| v == 0.0));
        }
    }
}
