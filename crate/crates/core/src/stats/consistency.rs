use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{mean_and_population_std, spearman, ResponseMatrix};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

/// Attempts allowed per requested split before degenerate resampling gives up.
pub(crate) const MAX_ATTEMPTS_PER_SPLIT: usize = 10;

/// Split-half consistency at one group size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub group_size: usize,
    pub n_splits: usize,
    pub mean_rho: f64,
    /// Population standard deviation of `per_split_rhos`.
    pub sigma_rho: f64,
    pub per_split_rhos: Vec<f64>,
    pub seed: u64,
    /// Splits discarded because a group's score vector was constant.
    pub resampled: usize,
    /// True when the two groups together use fewer than all participants.
    pub subsampled: bool,
    pub n_participants: usize,
}

impl ConsistencyReport {
    pub(crate) fn from_rhos(
        group_size: usize,
        rhos: Vec<f64>,
        seed: u64,
        resampled: usize,
        n_participants: usize,
    ) -> Self {
        let (mean_rho, sigma_rho) = mean_and_population_std(&rhos);
        Self {
            group_size,
            n_splits: rhos.len(),
            mean_rho,
            sigma_rho,
            per_split_rhos: rhos,
            seed,
            resampled,
            subsampled: 2 * group_size < n_participants,
            n_participants,
        }
    }
}

/// The two disjoint groups of `k` participants (out of `n`) used by split
/// attempt `attempt` under `seed`.
pub fn split_groups(n: usize, k: usize, seed: u64, attempt: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream_rng(seed, attempt as u64);
    let mut drawn = sample(&mut rng, n, 2 * k).into_vec();
    let second = drawn.split_off(k);
    (drawn, second)
}

/// Spearman correlation between two score vectors over the entries defined in both.
pub(crate) fn paired_rho(a: &[Option<f64>], b: &[Option<f64>]) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(b)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip();
    if x.len() < 2 {
        return Err(Error::DegenerateInput(
            "fewer than two targets observed by both groups".into(),
        ));
    }
    spearman(&x, &y)
}

/// Repeats `draw` until `wanted` non-degenerate values are collected, allowing
/// at most `MAX_ATTEMPTS_PER_SPLIT * wanted` attempts. Returns values and the
/// number of discarded attempts.
pub(crate) fn collect_splits(
    wanted: usize,
    mut draw: impl FnMut(usize) -> Result<f64>,
) -> Result<(Vec<f64>, usize)> {
    let cap = MAX_ATTEMPTS_PER_SPLIT * wanted;
    let mut rhos = Vec::with_capacity(wanted);
    let mut discarded = 0;
    let mut attempt = 0;
    while rhos.len() < wanted {
        if attempt == cap {
            return Err(Error::TooManyDegenerateSplits {
                attempts: cap,
                accepted: rhos.len(),
                wanted,
            });
        }
        match draw(attempt) {
            Ok(rho) => rhos.push(rho),
            Err(Error::DegenerateInput(_)) => discarded += 1,
            Err(e) => return Err(e),
        }
        attempt += 1;
    }
    Ok((rhos, discarded))
}

/// Mean and spread of the Spearman correlation between per-target scores of
/// two disjoint random groups of `k` participants, over `n_splits` splits.
///
/// Each split draws `2k` participants without replacement. Missing cells are
/// left out of a group's means; a split in which a group's score vector is
/// constant is discarded and redrawn.
pub fn split_half_consistency(
    m: &ResponseMatrix,
    k: usize,
    n_splits: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("group size must be >= 2, got {k}")));
    }
    if n_splits == 0 {
        return Err(Error::InvalidInput("need at least one split".into()));
    }
    let n = m.n_participants();
    if 2 * k > n {
        return Err(Error::InsufficientParticipants {
            needed: 2 * k,
            available: n,
        });
    }

    let (rhos, resampled) = collect_splits(n_splits, |attempt| {
        let (a, b) = split_groups(n, k, seed, attempt);
        paired_rho(&m.group_means(&a), &m.group_means(&b))
    })?;
    Ok(ConsistencyReport::from_rhos(k, rhos, seed, resampled, n))
}

/// One report per group size; the seed for size `k` is `derive_seed(seed, k)`.
pub fn consistency_curve(
    m: &ResponseMatrix,
    group_sizes: &[usize],
    n_splits: usize,
    seed: u64,
) -> Result<Vec<ConsistencyReport>> {
    group_sizes
        .iter()
        .map(|&k| split_half_consistency(m, k, n_splits, derive_seed(seed, k as u64)))
        .collect()
}
