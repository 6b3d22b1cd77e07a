//! Measurements shared by the core integration tests and the acceptance suite.
//! Each returns the measured quantity; callers decide the tolerance.
#![allow(dead_code)]

use crate::support::reference::{
    central_difference, kkt_violation, reference_minimize, squared_hinge_gradient,
    squared_hinge_objective,
};
use assassin_core::eval::{cross_validate_dataset, kfold_split, TrainerSpec};
use assassin_core::features::{build_dataset, CleanTeamRule, FeatureSpec, StatSet};
use assassin_core::linalg::Matrix;
use assassin_core::mlp::{MlpConfig, MlpModel};
use assassin_core::model::predict_merlin;
use assassin_core::search::{powerset_search, SearchConfig};
use assassin_core::sim::{simulate_dataset, SimConfig};
use assassin_core::svm::{
    one_vs_rest, train_linear_svc, train_rbf_svc, LinearSvcParams, RbfSvcParams,
};
use assassin_core::GameStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random classification data; odd seeds shift each class mean so some are separable.
pub fn random_dataset(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(5..=50);
    let d = rng.gen_range(1..=10);
    let c = [0.01, 0.1, 1.0, 10.0][rng.gen_range(0..4)];
    let shift = if seed % 2 == 1 { 2.0 } else { 0.0 };
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.gen_range(0..5);
        let row: Vec<f64> = (0..d)
            .map(|j| rng.gen_range(-1.0..1.0) + if j == label % d { shift } else { 0.0 })
            .collect();
        rows.push(row);
        y.push(label);
    }
    (rows, y, c)
}

fn norm(w: &[f64], b: f64) -> f64 {
    (w.iter().map(|v| v * v).sum::<f64>() + b * b).sqrt()
}

pub struct LinearCheck {
    /// Worst final over initial gradient norm across the five binary problems.
    pub grad_ratio: f64,
    /// Worst relative objective gap to the reference optimizer.
    pub objective_gap: f64,
}

pub fn linear_check(seed: u64) -> LinearCheck {
    let (rows, y, c) = random_dataset(seed);
    let x = Matrix::from_rows(&rows).unwrap();
    let model = train_linear_svc(
        &x,
        &y,
        &LinearSvcParams {
            c,
            ..LinearSvcParams::default()
        },
    )
    .unwrap();
    let d = rows[0].len();
    let mut out = LinearCheck {
        grad_ratio: 0.0,
        objective_gap: 0.0,
    };
    for k in 0..5 {
        let yk = one_vs_rest(&y, k);
        let (g0w, g0b) = squared_hinge_gradient(&vec![0.0; d], 0.0, &rows, &yk, c);
        let (gw, gb) = squared_hinge_gradient(&model.weights[k], model.biases[k], &rows, &yk, c);
        out.grad_ratio = out.grad_ratio.max(norm(&gw, gb) / norm(&g0w, g0b));
        let ours = squared_hinge_objective(&model.weights[k], model.biases[k], &rows, &yk, c);
        let (_, _, reference) = reference_minimize(&rows, &yk, c, 2_000_000);
        out.objective_gap = out
            .objective_gap
            .max((ours - reference).abs() / reference.abs().max(1e-12));
    }
    out
}

/// Worst KKT violation over the one-vs-rest problems of an RBF fit.
pub fn audit_rbf(rows: &[Vec<f64>], y: &[usize], params: &RbfSvcParams) -> f64 {
    let x = Matrix::from_rows(rows).unwrap();
    let model = train_rbf_svc(&x, y, params).unwrap();
    let mut worst: f64 = 0.0;
    for (k, class) in model.per_class.iter().enumerate() {
        let yk = one_vs_rest(y, k);
        let mut alpha = vec![0.0; rows.len()];
        for (&i, &coef) in class.support_indices.iter().zip(&class.dual_coef) {
            alpha[i] = coef.abs();
        }
        worst = worst.max(kkt_violation(
            rows,
            &yk,
            &alpha,
            class.bias,
            model.gamma,
            model.c,
        ));
    }
    worst
}

pub fn rbf_random_kkt(seed: u64) -> f64 {
    let (rows, y, c) = random_dataset(100 + seed);
    audit_rbf(
        &rows,
        &y,
        &RbfSvcParams {
            c,
            ..RbfSvcParams::default()
        },
    )
}

/// `(kkt violation, training accuracy)` on the four XOR points.
pub fn rbf_xor() -> (f64, f64) {
    let rows = vec![
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
    ];
    let y = vec![0, 0, 1, 1];
    let params = RbfSvcParams {
        c: 10.0,
        gamma: Some(1.0),
        ..RbfSvcParams::default()
    };
    let kkt = audit_rbf(&rows, &y, &params);
    let x = Matrix::from_rows(&rows).unwrap();
    let model = train_rbf_svc(&x, &y, &params).unwrap();
    let mask = [true, true, true, false, false];
    let correct = (0..4)
        .filter(|&i| predict_merlin(&model, x.row(i), &mask).unwrap() == y[i])
        .count();
    (kkt, correct as f64 / 4.0)
}

pub fn rbf_simulated_kkt() -> f64 {
    let stream = simulate_dataset(&SimConfig {
        num_games: 150,
        seed: 3,
        eligible_only: true,
        ..SimConfig::default()
    })
    .unwrap();
    let ds = build_dataset(&stream, &FeatureSpec::default()).unwrap();
    let rows: Vec<Vec<f64>> = ds.x.iter_rows().map(<[f64]>::to_vec).collect();
    audit_rbf(&rows, &ds.labels, &RbfSvcParams::default())
}

pub fn random_net(seed: u64) -> (MlpModel, Vec<f64>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=6);
    let depth = rng.gen_range(1..=3);
    let widths: Vec<usize> = (0..depth).map(|_| rng.gen_range(2..=6)).collect();
    let model = MlpModel::init(
        d,
        MlpConfig {
            layer_widths: widths,
            seed,
            ..MlpConfig::default()
        },
    );
    let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (model, x, rng.gen_range(0..5))
}

/// Worst relative error between backprop and central differences, and how many
/// parameters were skipped because a ReLU kink sits inside the probe interval.
pub fn max_gradient_error(model: &MlpModel, x: &[f64], label: usize) -> (f64, usize) {
    const H: f64 = 1e-6;
    let analytic = model.loss_gradient(x, label);
    let theta = model.parameters();
    let loss_at = |p: &[f64]| {
        let mut probe = model.clone();
        probe.set_parameters(p);
        probe.loss(x, label)
    };
    let centre = loss_at(&theta);
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut p = theta.clone();
        p[i] += H;
        let forward = (loss_at(&p) - centre) / H;
        p[i] = theta[i] - H;
        let backward = (centre - loss_at(&p)) / H;
        // smooth pieces agree to O(h); a kink shows up as a jump in slope
        if (forward - backward).abs() > 1e-4 * (1.0 + forward.abs() + backward.abs()) {
            skipped += 1;
            continue;
        }
        let numeric = central_difference(loss_at, &theta, i, H);
        let rel = (a - numeric).abs() / (a.abs().max(numeric.abs())).max(1e-8);
        worst = worst.max(rel);
    }
    (worst, skipped)
}

/// Checks one split for disjointness, coverage and the size rule.
pub fn check_plan(n: usize, k: usize, seed: u64) -> Result<(), String> {
    let plan = kfold_split(n, k, seed).map_err(|e| e.to_string())?;
    if plan.k() != k {
        return Err(format!("n={n} k={k}: {} folds", plan.k()));
    }
    let mut seen = vec![false; n];
    for &i in plan.folds.iter().flatten() {
        if i >= n || seen[i] {
            return Err(format!("n={n} k={k}: index {i} repeated or out of range"));
        }
        seen[i] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(format!("n={n} k={k}: not covering"));
    }
    let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
    let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
    if hi - lo > 1 {
        return Err(format!("n={n} k={k}: sizes {sizes:?}"));
    }
    Ok(())
}

/// Every `2 <= k <= n <= max_n`; returns the number of splits checked.
pub fn sweep_plans(max_n: usize) -> Result<usize, String> {
    let mut count = 0;
    for n in 2..=max_n {
        for k in 2..=n {
            check_plan(n, k, (n * 1000 + k) as u64)?;
            count += 1;
        }
    }
    Ok(count)
}

pub fn fold_sizes(n: usize, k: usize) -> Vec<usize> {
    kfold_split(n, k, 0)
        .unwrap()
        .folds
        .iter()
        .map(Vec::len)
        .collect()
}

pub fn eligible_stream(games: usize, seed: u64) -> GameStream {
    simulate_dataset(&SimConfig {
        num_games: games,
        seed,
        eligible_only: true,
        ..SimConfig::default()
    })
    .unwrap()
}

pub fn linear() -> TrainerSpec {
    TrainerSpec::LinearSvc(LinearSvcParams::default())
}

fn stat_key(bits: u16) -> Vec<u32> {
    (0..9).filter(|i| bits & (1 << i) != 0).collect()
}

/// Featurizes each subset from scratch and ranks with its own comparator.
/// Returns the best subset's bits and every `(bits, mean accuracy)` sorted by bits.
pub fn exhaustive_best(
    s: &GameStream,
    candidates: &[usize],
    folds: usize,
    seed: u64,
) -> (u16, Vec<(u16, f64)>) {
    let n = candidates.len();
    let mut scores = Vec::new();
    for mask in 1u32..(1 << n) {
        let bits: u16 = (0..n)
            .filter(|j| mask & (1 << j) != 0)
            .map(|j| 1u16 << candidates[j])
            .sum();
        let spec = FeatureSpec::Engineered {
            subset: StatSet::from_bits(bits),
            clean_rule: CleanTeamRule::NoSpies,
        };
        let ds = build_dataset(s, &spec).unwrap();
        let plan = kfold_split(ds.len(), folds, seed).unwrap();
        let out = cross_validate_dataset(&ds, &linear(), &plan).unwrap();
        scores.push((bits, out.mean_accuracy()));
    }
    let best = scores
        .iter()
        .copied()
        .reduce(|a, b| {
            let better = b.1 > a.1
                || (b.1 == a.1
                    && (b.0.count_ones(), stat_key(b.0)) < (a.0.count_ones(), stat_key(a.0)));
            if better {
                b
            } else {
                a
            }
        })
        .unwrap();
    scores.sort_unstable_by_key(|s| s.0);
    (best.0, scores)
}

/// Runs the library search and the exhaustive recomputation on one candidate set.
pub fn compare_search(
    s: &GameStream,
    candidates: &[usize],
    folds: usize,
    seed: u64,
) -> Result<(), String> {
    let bits: u16 = candidates.iter().map(|&c| 1u16 << c).sum();
    let config = SearchConfig {
        candidates: StatSet::from_bits(bits),
        folds,
        seed,
        trainer: linear(),
        ..SearchConfig::default()
    };
    let result = powerset_search(s, &config).map_err(|e| e.to_string())?;
    let (best, scores) = exhaustive_best(s, candidates, folds, seed);
    if result.evaluated != (1 << candidates.len()) - 1 {
        return Err(format!("{candidates:?}: evaluated {}", result.evaluated));
    }
    if result.best.bits() != best {
        return Err(format!(
            "{candidates:?}: best {} vs exhaustive {best:#b}",
            result.best
        ));
    }
    let mut ours: Vec<(u16, f64)> = result
        .ranking
        .iter()
        .map(|r| (r.subset.bits(), r.mean_accuracy))
        .collect();
    ours.sort_unstable_by_key(|s| s.0);
    for (a, b) in ours.iter().zip(&scores) {
        if a.0 != b.0 || (a.1 - b.1).abs() > 1e-12 {
            return Err(format!("subset {:#b}: {} vs {}", a.0, a.1, b.1));
        }
    }
    Ok(())
}

/// Number of distinct subsets the full nine-statistic search evaluates.
pub fn full_search_subsets(s: &GameStream) -> (usize, usize) {
    let config = SearchConfig {
        folds: 3,
        seed: 2,
        trainer: linear(),
        ..SearchConfig::default()
    };
    let result = powerset_search(s, &config).unwrap();
    let mut bits: Vec<u16> = result.ranking.iter().map(|r| r.subset.bits()).collect();
    bits.sort_unstable();
    bits.dedup();
    (result.evaluated, bits.len())
}
