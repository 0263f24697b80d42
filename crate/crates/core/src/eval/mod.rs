//! Repeated train/test evaluation, feature-set comparison, per-item error
//! differences and the human-consistency upper bound.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::MemorabilityTable;
use crate::gbt::{predict, train, FeatureMatrix, GBTHyperparams};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{
    collect_splits, mean_and_population_std, spearman, split_half_consistency,
    ConsistencyReport, ResponseMatrix,
};

pub const MIN_EVAL_ITEMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_splits: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_splits: 25,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_splits == 0 {
            return Err(Error::InvalidInput("n_splits must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Feature-set or run label.
    pub name: String,
    pub n_items: usize,
    pub per_split_rho: Vec<f64>,
    pub mean_rho: f64,
    /// Population standard deviation of `per_split_rho`.
    pub sigma_rho: f64,
    /// Splits redrawn because a test ranking was constant.
    pub resampled: usize,
    pub config: EvalConfig,
    pub hyperparams: GBTHyperparams,
}

/// Train and test row indices (sorted) for split attempt `attempt` over `n` items.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64, attempt: usize) -> (Vec<usize>, Vec<usize>) {
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(2, n.saturating_sub(2).max(2));
    let mut rng = stream_rng(seed, attempt as u64);
    let mut test = sample(&mut rng, n, n_test).into_vec();
    test.sort_unstable();
    let mut in_test = vec![false; n];
    for &i in &test {
        in_test[i] = true;
    }
    ((0..n).filter(|&i| !in_test[i]).collect(), test)
}

/// Features aligned to the table's row order and the matching scores.
fn align(x: &FeatureMatrix, gt: &MemorabilityTable) -> Result<(FeatureMatrix, Vec<f64>)> {
    let gt_ids: BTreeSet<&str> = gt.rows.iter().map(|r| r.item_id.as_str()).collect();
    let x_ids: BTreeSet<&str> = x.item_ids().iter().map(String::as_str).collect();
    if gt_ids.len() != gt.rows.len() {
        return Err(Error::InvalidInput("duplicate item ids in ground truth".into()));
    }
    if gt_ids != x_ids {
        let only_gt = gt_ids.difference(&x_ids).count();
        let only_x = x_ids.difference(&gt_ids).count();
        return Err(Error::InvalidInput(format!(
            "item sets differ: {only_gt} only in ground truth, {only_x} only in features"
        )));
    }
    let ids: Vec<String> = gt.rows.iter().map(|r| r.item_id.clone()).collect();
    let y = gt.rows.iter().map(|r| r.score).collect();
    Ok((x.align_to(&ids)?, y))
}

/// Mean Spearman ρ between held-out predictions and ground truth over
/// `cfg.n_splits` random splits. Split attempt `a` trains with seed
/// `derive_seed(hp.seed, a)`.
pub fn eval_protocol(
    x: &FeatureMatrix,
    gt: &MemorabilityTable,
    hp: &GBTHyperparams,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    eval_named("", x, gt, hp, cfg)
}

fn eval_named(
    name: &str,
    x: &FeatureMatrix,
    gt: &MemorabilityTable,
    hp: &GBTHyperparams,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    hp.validate()?;
    let (x, y) = align(x, gt)?;
    let n = y.len();
    if n < MIN_EVAL_ITEMS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_EVAL_ITEMS} items, got {n}"
        )));
    }
    let (rhos, resampled) = collect_splits(cfg.n_splits, |attempt| {
        let (tr, te) = train_test_split(n, cfg.test_fraction, cfg.seed, attempt);
        let y_tr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
        let y_te: Vec<f64> = te.iter().map(|&i| y[i]).collect();
        let split_hp = GBTHyperparams {
            seed: derive_seed(hp.seed, attempt as u64),
            ..hp.clone()
        };
        let model = train(&x.select_rows(&tr), &y_tr, &split_hp)?;
        let pred = predict(&model, &x.select_rows(&te))?;
        spearman(&pred, &y_te)
    })?;
    let (mean_rho, sigma_rho) = mean_and_population_std(&rhos);
    Ok(EvalReport {
        name: name.to_string(),
        n_items: n,
        per_split_rho: rhos,
        mean_rho,
        sigma_rho,
        resampled,
        config: *cfg,
        hyperparams: hp.clone(),
    })
}

/// Evaluates every named feature set with the same splits, best first
/// (ties ordered by name).
pub fn compare_feature_sets(
    sets: &[(String, FeatureMatrix)],
    gt: &MemorabilityTable,
    hp: &GBTHyperparams,
    cfg: &EvalConfig,
) -> Result<Vec<EvalReport>> {
    if sets.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 feature sets, got {}",
            sets.len()
        )));
    }
    let mut reports = sets
        .iter()
        .map(|(name, x)| eval_named(name, x, gt, hp, cfg))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| b.mean_rho.total_cmp(&a.mean_rho).then_with(|| a.name.cmp(&b.name)));
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemErrorDiff {
    pub item_id: String,
    pub gt_score: f64,
    /// `|pred_a - gt| - |pred_b - gt|`; negative when A is closer.
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDiffBin {
    pub lo: f64,
    pub hi: f64,
    pub a_better: usize,
    pub b_better: usize,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDiffReport {
    pub items: Vec<ItemErrorDiff>,
    pub bins: Vec<ErrorDiffBin>,
}

/// Bin edges 0, 0.05, ..., 1.
pub fn default_bin_edges() -> Vec<f64> {
    (0..=20).map(|i| f64::from(i) / 20.0).collect()
}

/// Per-item error differences between two prediction sets, binned by
/// ground-truth score. Bins are half-open `[lo, hi)` except the last, which
/// also holds `hi`; scores outside the edges go to the nearest end bin.
pub fn error_difference(
    pred_a: &BTreeMap<String, f64>,
    pred_b: &BTreeMap<String, f64>,
    gt: &MemorabilityTable,
    bin_edges: &[f64],
) -> Result<ErrorDiffReport> {
    if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput(
            "bin edges must be at least two strictly increasing values".into(),
        ));
    }
    if pred_a.len() != gt.rows.len() || pred_b.len() != gt.rows.len() {
        return Err(Error::InvalidInput(format!(
            "{} and {} predictions for {} ground-truth items",
            pred_a.len(),
            pred_b.len(),
            gt.rows.len()
        )));
    }
    let mut bins: Vec<ErrorDiffBin> = bin_edges
        .windows(2)
        .map(|w| ErrorDiffBin {
            lo: w[0],
            hi: w[1],
            a_better: 0,
            b_better: 0,
            ties: 0,
        })
        .collect();
    let mut items = Vec::with_capacity(gt.rows.len());
    for row in &gt.rows {
        let missing = || Error::InvalidInput(format!("no prediction for item {}", row.item_id));
        let a = *pred_a.get(&row.item_id).ok_or_else(missing)?;
        let b = *pred_b.get(&row.item_id).ok_or_else(missing)?;
        let diff = (a - row.score).abs() - (b - row.score).abs();
        let k = bin_edges[1..bin_edges.len() - 1].partition_point(|&e| e <= row.score);
        let bin = &mut bins[k];
        if diff < 0.0 {
            bin.a_better += 1;
        } else if diff > 0.0 {
            bin.b_better += 1;
        } else {
            bin.ties += 1;
        }
        items.push(ItemErrorDiff {
            item_id: row.item_id.clone(),
            gt_score: row.score,
            diff,
        });
    }
    Ok(ErrorDiffReport { items, bins })
}

/// Split-half consistency with the largest possible groups, `K = ⌊N/2⌋`.
pub fn human_upper_bound(m: &ResponseMatrix, n_splits: usize, seed: u64) -> Result<ConsistencyReport> {
    split_half_consistency(m, m.n_participants() / 2, n_splits, seed)
}
