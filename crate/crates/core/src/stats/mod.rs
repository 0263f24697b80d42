//! Rank statistics and the observer-consistency studies: split-half
//! consistency as a function of group size, and across-group score variance.

mod consistency;
mod matrix;
mod rank;
mod variance;

pub use consistency::{consistency_curve, split_groups, split_half_consistency, ConsistencyReport};
pub use matrix::ResponseMatrix;
pub use rank::{rank_transform, spearman, RankVector};
pub use variance::{group_variance_analysis, VarianceCurve, VariancePoint};

pub(crate) use consistency::{collect_splits, paired_rho};

/// Mean and population standard deviation.
pub fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
