use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ResponseMatrix;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub item_id: String,
    /// Hit rate over all participants.
    pub mean_score: f64,
    /// Unbiased variance of the group-mean score across groups.
    pub variance: f64,
    /// Groups in which at least one member observed the item.
    pub n_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceCurve {
    pub group_size: usize,
    pub seed: u64,
    pub points: Vec<VariancePoint>,
}

/// Across-group variance of per-item scores for each group size.
///
/// For group size `k`, `n_groups` groups of `k` participants are drawn with
/// replacement from the participant pool (a bootstrap group), so the variance
/// estimates the sampling variance of a score measured by `k` independent
/// observers. Items observed in fewer than two groups are left out.
pub fn group_variance_analysis(
    m: &ResponseMatrix,
    group_sizes: &[usize],
    n_groups: usize,
    seed: u64,
) -> Result<Vec<VarianceCurve>> {
    if n_groups < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least two groups to estimate a variance, got {n_groups}"
        )));
    }
    let n = m.n_participants();
    let overall = m.overall_means();

    group_sizes
        .iter()
        .map(|&k| {
            if k == 0 {
                return Err(Error::InvalidInput("group size must be positive".into()));
            }
            if k > n {
                return Err(Error::InsufficientParticipants {
                    needed: k,
                    available: n,
                });
            }
            let k_seed = derive_seed(seed, k as u64);
            let t = m.n_targets();
            let mut sums = vec![0.0; t];
            let mut sq_sums = vec![0.0; t];
            let mut counts = vec![0usize; t];
            let mut means = Vec::with_capacity(n_groups);
            for g in 0..n_groups {
                let mut rng = stream_rng(k_seed, g as u64);
                let members: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
                means.push(m.group_means(&members));
            }
            // two-pass for numerical stability
            for gm in &means {
                for (j, v) in gm.iter().enumerate() {
                    if let Some(v) = v {
                        sums[j] += v;
                        counts[j] += 1;
                    }
                }
            }
            for gm in &means {
                for (j, v) in gm.iter().enumerate() {
                    if let Some(v) = v {
                        let d = v - sums[j] / counts[j] as f64;
                        sq_sums[j] += d * d;
                    }
                }
            }
            let points = (0..t)
                .filter_map(|j| {
                    let mean_score = overall[j]?;
                    (counts[j] >= 2).then(|| VariancePoint {
                        item_id: m.target_ids()[j].clone(),
                        mean_score,
                        variance: sq_sums[j] / (counts[j] - 1) as f64,
                        n_groups: counts[j],
                    })
                })
                .collect();
            Ok(VarianceCurve {
                group_size: k,
                seed: k_seed,
                points,
            })
        })
        .collect()
}
