//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use memorability::eval::{compare_feature_sets, eval_protocol, EvalConfig};
use memorability::game::{
    aggregate_scores, alternating_order_effects, generate_sequence, order_study_report, simulate_sessions,
    validate_sequence, Attentiveness, MemorabilityTable, OrderMode, Role, SequenceParams, SessionRecord,
    SimulationParams, Spacing, StimulusItem, TableRow, TrialSequence,
};
use memorability::gbt::{train, train_with_history, FeatureMatrix, GBTHyperparams, Node};
use memorability::stats::{consistency_curve, group_variance_analysis, rank_transform, spearman, ResponseMatrix};
use memorability_server::{router, ExportFormat, ExportPart, ManualClock, Store, StoreOptions};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let criteria: Vec<(&str, u64, fn() -> Outcome)> = vec![
        ("rank statistics", 5, rank_statistics),
        ("sequence validity", 30, sequence_validity),
        ("consistency vs group size", 60, consistency_vs_group_size),
        ("variance vs group size", 60, variance_vs_group_size),
        ("display order effect", 60, display_order_effect),
        ("gbt oracle equivalence", 120, gbt_oracle_equivalence),
        ("evaluation harness", 120, evaluation_harness),
        ("server determinism and durability", 30, server_determinism),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= Duration::from_secs(limit);
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.2}s, limit {limit}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// ---- oracles ---------------------------------------------------------------

/// Average ranks (1-based) by counting, O(n²).
fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let below = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    pearson(&brute_ranks(a), &brute_ranks(b))
}

// ---- rank statistics ---------------------------------------------------------

fn rank_statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_closed = 0.0f64;
    let mut worst_ties = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(3..200);
        // a permutation scaled by a random positive factor has no ties
        let mut a: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 + 0.25).collect();
        let mut b: Vec<f64> = (0..n).map(|i| i as f64 - 7.0).collect();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        let ra = brute_ranks(&a);
        let rb = brute_ranks(&b);
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
        let nf = n as f64;
        let closed = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
        worst_closed = worst_closed.max((spearman(&a, &b).unwrap() - closed).abs());
    }
    for _ in 0..1000 {
        let n = rng.random_range(3..120);
        let levels = rng.random_range(2..6);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect();
        let ranks = rank_transform(&a).unwrap();
        for (x, y) in ranks.as_slice().iter().zip(brute_ranks(&a)) {
            worst_ties = worst_ties.max((x - y).abs());
        }
        let constant = a.iter().all(|v| *v == a[0]) || b.iter().all(|v| *v == b[0]);
        match spearman(&a, &b) {
            Ok(rho) if !constant => worst_ties = worst_ties.max((rho - spearman_oracle(&a, &b)).abs()),
            Err(_) if constant => {}
            other => return outcome(false, format!("unexpected result {other:?} (constant input: {constant})")),
        }
    }
    outcome(
        worst_closed <= 1e-9 && worst_ties <= 1e-9,
        format!("max |err| closed form {worst_closed:.1e}, ties {worst_ties:.1e} (tol 1e-9)"),
    )
}

// ---- sequence validity -------------------------------------------------------

/// Independent structural check, returning a description of the first problem.
fn check_structure(seq: &TrialSequence, p: &SequenceParams) -> Option<String> {
    if seq.presentations.len() != p.total_slots() {
        return Some(format!("{} slots, expected {}", seq.presentations.len(), p.total_slots()));
    }
    let mut showings: BTreeMap<&str, Vec<(usize, bool, Role)>> = BTreeMap::new();
    for (i, s) in seq.presentations.iter().enumerate() {
        if s.slot_index != i {
            return Some(format!("slot {} at position {i}", s.slot_index));
        }
        showings.entry(&s.item_id).or_default().push((i, s.is_repeat, s.role));
    }
    let mut counts = BTreeMap::new();
    for (id, shows) in &showings {
        let role = shows[0].2;
        *counts.entry(role.as_str()).or_insert(0usize) += 1;
        let ok = match (role, &shows[..]) {
            (Role::Filler, [(_, false, _)]) => true,
            (Role::Target, [(a, false, _), (b, true, _)]) => p.target_spacing.contains(b - a),
            (Role::VigilanceFiller, [(a, false, _), (b, true, _)]) => p.vigilance_spacing.contains(b - a),
            _ => false,
        };
        if !ok {
            return Some(format!("item {id} shown as {shows:?}"));
        }
    }
    for (role, n) in [("target", p.n_targets), ("filler", p.n_fillers), ("vigilance_filler", p.n_vigilance)] {
        if counts.get(role).copied().unwrap_or(0) != n {
            return Some(format!("{role} count {:?}, expected {n}", counts.get(role)));
        }
    }
    None
}

fn sequence_validity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut generated, mut infeasible, mut fixed_checked) = (0, 0, 0);
    for draw in 0..10_000u64 {
        let tmin = rng.random_range(1..8);
        let vmin = rng.random_range(1..3);
        let mut params = SequenceParams {
            n_targets: rng.random_range(0..15),
            n_fillers: rng.random_range(0..30),
            n_vigilance: rng.random_range(0..5),
            target_spacing: Spacing::new(tmin, tmin + rng.random_range(0..25)),
            vigilance_spacing: Spacing::new(vmin, vmin + rng.random_range(0..6)),
            ..SequenceParams::default()
        };
        let extra = rng.random_range(0..5);
        let pool: Vec<StimulusItem> = [
            (Role::Target, params.n_targets + extra, "t"),
            (Role::Filler, params.n_fillers + extra, "f"),
            (Role::VigilanceFiller, params.n_vigilance + extra, "v"),
        ]
        .into_iter()
        .flat_map(|(role, n, prefix)| {
            (0..n).map(move |i| StimulusItem::new(format!("{prefix}{i}"), format!("{prefix}{i}.jpg"), role))
        })
        .collect();
        let seed = rng.random();
        let seq = match generate_sequence(&pool, &params, seed) {
            Ok(s) => s,
            Err(memorability::Error::InfeasibleSequence(_)) => {
                infeasible += 1;
                continue;
            }
            Err(e) => return outcome(false, format!("draw {draw}: {e}")),
        };
        generated += 1;
        let violations = validate_sequence(&seq);
        if !violations.is_empty() {
            return outcome(false, format!("draw {draw}: {violations:?}"));
        }
        if let Some(problem) = check_structure(&seq, &params) {
            return outcome(false, format!("draw {draw}: {problem}"));
        }
        if draw % 10 == 0 {
            params.order_mode = OrderMode::FixedOrder(rng.random_range(0..50));
            if let Ok(a) = generate_sequence(&pool, &params, seed) {
                let b = generate_sequence(&pool, &params, seed.wrapping_add(1)).unwrap();
                if a.presentations != b.presentations || !validate_sequence(&a).is_empty() {
                    return outcome(false, format!("draw {draw}: fixed order not reproduced"));
                }
                fixed_checked += 1;
            }
        }
    }
    outcome(
        true,
        format!("{generated} sequences valid ({infeasible} draws infeasible), {fixed_checked} fixed orders reproduced"),
    )
}

// ---- simulated observer studies ----------------------------------------------

const N_ITEMS: usize = 45;
const N_PARTICIPANTS: usize = 270;

fn sim_params(n_targets: usize) -> SimulationParams {
    SimulationParams {
        sequence: SequenceParams {
            n_targets,
            n_fillers: 60,
            n_vigilance: 10,
            ..SequenceParams::default()
        },
        ..SimulationParams::default()
    }
}

/// True scores drawn from normal(0.66, 0.14) clipped to [0, 1].
fn true_scores(seed: u64) -> BTreeMap<String, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::<f64>::new(0.66, 0.14).unwrap();
    (0..N_ITEMS)
        .map(|i| (format!("item-{i:02}"), dist.sample(&mut rng).clamp(0.0, 1.0)))
        .collect()
}

fn simulated_matrix(scores: &BTreeMap<String, f64>, seed: u64) -> ResponseMatrix {
    let sessions = simulate_sessions(scores, N_PARTICIPANTS, None, &sim_params(scores.len()), seed).unwrap();
    aggregate_scores(sessions.iter().map(|(s, r)| (s, r)), &Attentiveness::default()).unwrap().1
}

/// Direct Monte-Carlo of the binomial-observer model: fresh populations,
/// random disjoint halves, Spearman of the two groups' hit rates.
fn consistency_oracle(p: &[f64], k: usize, populations: usize, splits: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rhos = Vec::new();
    for _ in 0..populations {
        let hits: Vec<Vec<f64>> = (0..N_PARTICIPANTS)
            .map(|_| p.iter().map(|&q| f64::from(rng.random::<f64>() < q.clamp(0.01, 0.99))).collect())
            .collect();
        let mut order: Vec<usize> = (0..N_PARTICIPANTS).collect();
        let mut done = 0;
        while done < splits {
            order.shuffle(&mut rng);
            let mean = |g: &[usize]| -> Vec<f64> {
                (0..p.len()).map(|j| g.iter().map(|&i| hits[i][j]).sum::<f64>() / k as f64).collect()
            };
            let (a, b) = (mean(&order[..k]), mean(&order[k..2 * k]));
            let flat = |v: &[f64]| v.iter().all(|x| *x == v[0]);
            if flat(&a) || flat(&b) {
                continue;
            }
            rhos.push(spearman_oracle(&a, &b));
            done += 1;
        }
    }
    rhos.iter().sum::<f64>() / rhos.len() as f64
}

fn consistency_vs_group_size() -> Outcome {
    let scores = true_scores(7);
    let m = simulated_matrix(&scores, 7);
    let ks = [40, 100, 135];
    let reports = consistency_curve(&m, &ks, 100, 7).unwrap();
    let p: Vec<f64> = scores.values().copied().collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        let oracle = consistency_oracle(&p, r.group_size, 10, 100, 1000 + i as u64);
        let within = (r.mean_rho - oracle).abs() <= 0.05;
        pass &= within;
        parts.push(format!(
            "K={} rho={:.3}±{:.3} (oracle {:.3})",
            r.group_size, r.mean_rho, r.sigma_rho, oracle
        ));
    }
    let increasing = reports.windows(2).all(|w| w[1].mean_rho > w[0].mean_rho);
    let decreasing = reports.windows(2).all(|w| w[1].sigma_rho < w[0].sigma_rho);
    pass &= increasing && decreasing;
    parts.push(format!("mean increasing: {increasing}, sigma decreasing: {decreasing}"));
    outcome(pass, parts.join("; "))
}

fn variance_vs_group_size() -> Outcome {
    let scores = true_scores(7);
    let m = simulated_matrix(&scores, 7);
    let n_groups = 1000;
    let curves = group_variance_analysis(&m, &[40, 130], n_groups, 7).unwrap();
    let s = n_groups as f64;
    let n = N_PARTICIPANTS as f64;
    let mut outside = Vec::new();
    let mut checked = 0;
    for c in &curves {
        let k = c.group_size as f64;
        for pt in &c.points {
            let p = scores[&pt.item_id].clamp(0.01, 0.99);
            let pq = p * (1.0 - p);
            let expected = pq / k;
            // sampling spread of the variance of S bootstrap means (binomial
            // excess kurtosis included) plus the spread of the plug-in p̂(1−p̂)
            let excess_kurtosis = (1.0 - 6.0 * pq) / (k * pq);
            let se2 = expected.powi(2) * (2.0 / (s - 1.0) + excess_kurtosis / s)
                + (1.0 - 2.0 * p).powi(2) * pq / n / (k * k);
            checked += 1;
            if (pt.variance - expected).abs() > 3.0 * se2.sqrt() {
                outside.push(format!(
                    "{}@K={} p={p:.3} z={:.2}",
                    pt.item_id,
                    c.group_size,
                    (pt.variance - expected) / se2.sqrt()
                ));
            }
        }
    }
    let var_at = |c: usize| -> BTreeMap<&str, f64> {
        curves[c].points.iter().map(|p| (p.item_id.as_str(), p.variance)).collect()
    };
    let (v40, v130) = (var_at(0), var_at(1));
    let decreased = v40.iter().filter(|(id, v)| v130.get(*id).is_some_and(|w| w < *v)).count();
    let frac = decreased as f64 / v40.len() as f64;
    let mut rho_high = Vec::new();
    for v in [&v40, &v130] {
        let (ps, vs): (Vec<f64>, Vec<f64>) = v
            .iter()
            .filter(|(id, _)| scores[**id] >= 0.5)
            .map(|(id, var)| (scores[*id], *var))
            .unzip();
        rho_high.push(spearman(&ps, &vs).unwrap());
    }
    // the same relation estimated from only 100 groups, for reference
    let few = group_variance_analysis(&m, &[40, 130], 100, 7).unwrap();
    let rho_few: Vec<f64> = few
        .iter()
        .map(|c| {
            let (ps, vs): (Vec<f64>, Vec<f64>) = c
                .points
                .iter()
                .filter(|pt| scores[&pt.item_id] >= 0.5)
                .map(|pt| (scores[&pt.item_id], pt.variance))
                .unzip();
            spearman(&ps, &vs).unwrap()
        })
        .collect();
    let pass = outside.is_empty() && frac >= 0.9 && rho_high.iter().all(|r| *r <= -0.8);
    outcome(
        pass,
        format!(
            "{n_groups} groups: {}/{checked} item variances outside 3 SE of p(1-p)/K {outside:?}; \
             {:.0}% decrease 40->130; spearman(p, var | p>=0.5) = {:.3} (K=40), {:.3} (K=130) \
             [100 groups: {:.3}, {:.3}]",
            outside.len(),
            frac * 100.0,
            rho_high[0],
            rho_high[1],
            rho_few[0],
            rho_few[1]
        ),
    )
}

fn order_gap(delta: f64, seed: u64) -> (f64, f64) {
    let scores = true_scores(seed);
    let ids: Vec<String> = scores.keys().cloned().collect();
    let orders = [1u32, 2];
    let effects = alternating_order_effects(&ids, &orders, delta, 0.5, seed).unwrap();
    let mut grouped: BTreeMap<u32, Vec<(TrialSequence, SessionRecord)>> = BTreeMap::new();
    for o in orders {
        let mut params = sim_params(ids.len());
        params.sequence.order_mode = OrderMode::FixedOrder(o);
        let sessions = simulate_sessions(&scores, 500, Some(&effects), &params, seed * 100 + u64::from(o)).unwrap();
        grouped.insert(o, sessions);
    }
    let r = order_study_report(&grouped, 25, 100, &Attentiveness::default(), seed).unwrap();
    (r.within_order.mean_rho, r.cross_order.mean_rho)
}

fn display_order_effect() -> Outcome {
    let (within, cross) = order_gap(0.3, 11);
    let (within0, cross0) = order_gap(0.0, 11);
    let gap = within - cross;
    let gap0 = within0 - cross0;
    outcome(
        gap >= 0.15 && gap0.abs() <= 0.05,
        format!(
            "delta 0.3: within {within:.3} cross {cross:.3} gap {gap:.3} (>= 0.15); \
             delta 0: within {within0:.3} cross {cross0:.3} gap {gap0:.3} (|gap| <= 0.05)"
        ),
    )
}

// ---- gradient boosting ---------------------------------------------------------

fn dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (FeatureMatrix, Vec<f64>) {
    let discrete = rng.random::<bool>();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| if discrete { rng.random_range(0..6) as f64 } else { rng.random::<f64>() })
                .collect()
        })
        .collect();
    let y = rows.iter().map(|r| r[0].sin() + rng.random::<f64>()).collect();
    let ids = (0..n).map(|i| format!("r{i}")).collect();
    (FeatureMatrix::from_rows(ids, rows).unwrap(), y)
}

/// Best stump by exhaustive search: (feature, threshold, left weight, right weight).
fn brute_stump(x: &FeatureMatrix, y: &[f64], base: f64, lambda: f64) -> Option<(usize, f64, f64, f64)> {
    let n = y.len();
    let sums = |j: usize, t: f64| {
        let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            if x.get(i, j) < t {
                gl += base - y[i];
                hl += 1.0;
            } else {
                gr += base - y[i];
                hr += 1.0;
            }
        }
        (gl, hl, gr, hr)
    };
    let mut best: Option<(f64, usize, f64)> = None;
    for j in 0..x.n_features() {
        let mut vals: Vec<f64> = (0..n).map(|i| x.get(i, j)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let (gl, hl, gr, hr) = sums(j, t);
            let (g, h) = (gl + gr, hl + hr);
            let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda));
            if best.is_none_or(|b| gain > b.0) {
                best = Some((gain, j, t));
            }
        }
    }
    let (gain, j, t) = best.filter(|b| b.0 > 0.0)?;
    let _ = gain;
    let (gl, hl, gr, hr) = sums(j, t);
    Some((j, t, -gl / (hl + lambda), -gr / (hr + lambda)))
}

fn gbt_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut stumps = 0;
    for case in 0..50 {
        let n = rng.random_range(2..=200);
        let d = rng.random_range(1..=5);
        let (x, y) = dataset(&mut rng, n, d);
        let lambda = if case % 2 == 0 { 0.0 } else { rng.random_range(0.0..2.0) };
        let hp = GBTHyperparams {
            n_rounds: 1,
            max_depth: 1,
            learning_rate: 1.0,
            reg_lambda: lambda,
            min_child_weight: 0.0,
            subsample: 1.0,
            colsample: 1.0,
            ..GBTHyperparams::default()
        };
        let m = train(&x, &y, &hp).unwrap();
        let same = match (brute_stump(&x, &y, m.base_score, lambda), &m.trees[0].nodes[..]) {
            (
                Some((j, t, wl, wr)),
                [Node::Split { feature, threshold, .. }, Node::Leaf { weight: l }, Node::Leaf { weight: r }],
            ) => *feature == j && *threshold == t && *l == wl && *r == wr,
            (None, [Node::Leaf { .. }]) => true,
            _ => false,
        };
        if !same {
            return outcome(false, format!("stump case {case} (n={n}, d={d}) differs from exhaustive search"));
        }
        stumps += 1;
    }
    let mut worst_rise = 0.0f64;
    for case in 0..50 {
        let n = rng.random_range(10..=200);
        let d = rng.random_range(1..=5);
        let (x, y) = dataset(&mut rng, n, d);
        let hp = GBTHyperparams {
            n_rounds: 200,
            max_depth: rng.random_range(1..=6),
            learning_rate: rng.random_range(0.05..1.0),
            reg_lambda: rng.random_range(0.0..3.0),
            subsample: 1.0,
            colsample: 1.0,
            seed: case,
            ..GBTHyperparams::default()
        };
        let (_, hist) = train_with_history(&x, &y, &hp).unwrap();
        for w in hist.train_mse.windows(2) {
            worst_rise = worst_rise.max((w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE));
        }
    }
    outcome(
        worst_rise <= 1e-12,
        format!("{stumps}/50 stumps identical to exhaustive search; max relative MSE rise over 200 rounds {worst_rise:.1e} (tol 1e-12)"),
    )
}

// ---- evaluation harness ---------------------------------------------------------

fn table(ids: &[String], y: &[f64]) -> MemorabilityTable {
    MemorabilityTable {
        rows: ids
            .iter()
            .zip(y)
            .map(|(id, &s)| TableRow {
                item_id: id.clone(),
                score: s,
                hits: 0,
                n_observers: 0,
                variance: s * (1.0 - s),
                false_alarms: 0.0,
            })
            .collect(),
    }
}

fn columns(ids: &[String], cols: &[&Vec<f64>]) -> FeatureMatrix {
    let rows = (0..ids.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    FeatureMatrix::from_rows(ids.to_vec(), rows).unwrap()
}

fn evaluation_harness() -> Outcome {
    let n = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let ids: Vec<String> = (0..n).map(|i| format!("img{i:03}")).collect();
    let col = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.random::<f64>()).collect() };
    let (a, b) = (col(&mut rng), col(&mut rng));
    let noise: Vec<Vec<f64>> = (0..3).map(|_| col(&mut rng)).collect();
    let y: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 1.0 / (1.0 + (-3.0 * (u + 0.5 * v - 0.75)).exp())).collect();
    let gt = table(&ids, &y);
    let hp = GBTHyperparams {
        n_rounds: 200,
        max_depth: 4,
        learning_rate: 0.1,
        ..GBTHyperparams::default()
    };
    let cfg = EvalConfig {
        seed: 9,
        ..EvalConfig::default()
    };

    let informative = columns(&ids, &[&a, &b]);
    let task = eval_protocol(&informative, &gt, &hp, &cfg).unwrap();

    let mut permuted = y.clone();
    permuted.shuffle(&mut rng);
    let null = eval_protocol(&informative, &table(&ids, &permuted), &hp, &cfg).unwrap();
    let null_ok = null.mean_rho.abs() <= 3.0 * null.sigma_rho;
    let null_z = null.mean_rho / (null.sigma_rho / (null.per_split_rho.len() as f64).sqrt());

    let noise_set = columns(&ids, &noise.iter().collect::<Vec<_>>());
    let ranked = compare_feature_sets(
        &[("informative".into(), informative), ("noise".into(), noise_set)],
        &gt,
        &hp,
        &cfg,
    )
    .unwrap();
    let margin = ranked[0].mean_rho - ranked[1].mean_rho;
    let ranked_ok = ranked[0].name == "informative" && margin >= 0.3;

    // each set sees one of the two inputs; their union sees both
    let y2: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 0.5 * u + 0.5 * v).collect();
    let gt2 = table(&ids, &y2);
    let (set_a, set_b) = (columns(&ids, &[&a]), columns(&ids, &[&b]));
    let both = set_a.hconcat(&set_b).unwrap();
    let sets = [("a".to_string(), set_a), ("b".to_string(), set_b), ("a+b".to_string(), both)];
    let combined = compare_feature_sets(&sets, &gt2, &hp, &cfg).unwrap();
    let rho = |name: &str| combined.iter().find(|r| r.name == name).unwrap().mean_rho;
    let concat_ok = rho("a+b") >= rho("a").max(rho("b"));

    outcome(
        task.mean_rho >= 0.95 && null_ok && ranked_ok && concat_ok,
        format!(
            "synthetic rho {:.3} (>= 0.95); null {:.3} ± {:.3} (|mean| <= 3σ: {null_ok}, mean/SE {null_z:.2}); \
             informative - noise {margin:.3} (>= 0.3); concat {:.3} vs a {:.3}, b {:.3}",
            task.mean_rho,
            null.mean_rho,
            null.sigma_rho,
            rho("a+b"),
            rho("a"),
            rho("b")
        ),
    )
}

// ---- server -------------------------------------------------------------------

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&v).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn server_pool() -> Vec<StimulusItem> {
    let mut pool = Vec::new();
    for (role, n, prefix) in [(Role::Target, 6, "t"), (Role::Filler, 14, "f"), (Role::VigilanceFiller, 2, "v")] {
        for i in 0..n {
            pool.push(StimulusItem::new(format!("{prefix}{i}"), format!("/stimuli/{prefix}{i}.jpg"), role));
        }
    }
    pool
}

fn server_params() -> SequenceParams {
    SequenceParams {
        n_targets: 6,
        n_fillers: 14,
        n_vigilance: 2,
        target_spacing: Spacing::new(3, 10),
        vigilance_spacing: Spacing::new(1, 4),
        order_mode: OrderMode::FixedOrder(1),
        ..SequenceParams::default()
    }
}

fn exports(store: &Store) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for format in [ExportFormat::Csv, ExportFormat::Jsonl] {
        for part in [None, Some(ExportPart::Table), Some(ExportPart::Matrix)] {
            out.push(store.export("live", format, part).unwrap());
        }
    }
    out
}

fn open_store(dir: &std::path::Path, snapshot_every: usize) -> Store {
    let opts = StoreOptions {
        snapshot_every,
        fsync: false,
        ..StoreOptions::default()
    };
    Store::open_with_clock(dir, opts, Arc::new(ManualClock::new(1_700_000_000_000, 7))).unwrap()
}

fn server_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let seq = generate_sequence(&server_pool(), &server_params(), 0).unwrap();
    let repeats: Vec<usize> = seq.presentations.iter().filter(|p| p.is_repeat).map(|p| p.slot_index).collect();
    let first_showings: Vec<usize> =
        seq.presentations.iter().filter(|p| !p.is_repeat).map(|p| p.slot_index).collect();

    let store = Arc::new(open_store(dir.path(), 5));
    let app = router(store.clone(), None);
    let n_participants = 6;
    let (created, posts) = runtime.block_on(async {
        let body = json!({
            "experiment_id": "live",
            "pool": server_pool(),
            "params": server_params(),
            "max_sessions": 20,
            "seed": 3,
        });
        let (status, _) = call(&app, "POST", "/experiments", Some(body)).await;
        let mut posts = 0;
        for i in 0..n_participants {
            let (_, body) =
                call(&app, "POST", "/experiments/live/sessions", Some(json!({"participant_id": format!("p{i}")}))).await;
            let sid = serde_json::from_slice::<Value>(&body).unwrap()["session_id"].as_str().unwrap().to_string();
            // participant i misses every repeat at a position divisible by i+2 and
            // false-alarms once; every press is sent three times, concurrently
            let presses: Vec<usize> = repeats
                .iter()
                .enumerate()
                .filter(|(j, _)| j % (i + 2) != 0)
                .map(|(_, s)| *s)
                .chain([first_showings[i]])
                .collect();
            for slot in presses {
                let uri = format!("/sessions/{sid}/responses");
                let body = json!({"slot_index": slot, "latency_ms": 400 + slot});
                let (a, b, c) = tokio::join!(
                    call(&app, "POST", &uri, Some(body.clone())),
                    call(&app, "POST", &uri, Some(body.clone())),
                    call(&app, "POST", &uri, Some(body))
                );
                assert!([a.0, b.0, c.0].iter().all(|s| s.is_success()));
                posts += 3;
            }
            call(&app, "POST", &format!("/sessions/{sid}/complete"), None).await;
        }
        (status, posts)
    });
    if created != StatusCode::CREATED {
        return outcome(false, format!("experiment creation returned {created}"));
    }
    let before = exports(&store);
    drop(app);
    drop(store);

    let log_path = dir.path().join("live").join("events.jsonl");
    let log = std::fs::read_to_string(&log_path).unwrap();
    let mut per_slot: BTreeMap<(String, u64), usize> = BTreeMap::new();
    for line in log.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        if v["payload"]["kind"] == "response_recorded" {
            let e = &v["payload"]["event"];
            *per_slot
                .entry((e["session_id"].as_str().unwrap().to_string(), e["slot_index"].as_u64().unwrap()))
                .or_default() += 1;
        }
    }
    let single = per_slot.values().all(|&c| c == 1);

    // a crash mid-append leaves a torn final line
    std::fs::OpenOptions::new()
        .append(true)
        .open(&log_path)
        .and_then(|mut f| std::io::Write::write_all(&mut f, br#"{"offset":999,"timestamp_ms":1,"payl"#))
        .unwrap();
    let mut identical = true;
    for snapshot_every in [0, 1, 5, 1000] {
        let reopened = open_store(dir.path(), snapshot_every);
        identical &= exports(&reopened) == before;
    }
    std::fs::remove_file(dir.path().join("live").join("snapshot.json")).ok();
    identical &= exports(&open_store(dir.path(), 0)) == before;

    outcome(
        single && identical,
        format!(
            "{posts} response POSTs -> {} logged responses, one per (session, slot): {single}; \
             6 exports byte-identical after torn-tail replay with and without snapshots: {identical}",
            per_slot.len()
        ),
    )
}
