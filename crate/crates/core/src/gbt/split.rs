use crate::error::{Error, Result};

/// Regularization shared by split search and leaf fitting.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Regularization {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

/// Optimal leaf value `-G / (H + λ)` of the second-order objective.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    let denom = h + lambda;
    if !(denom > 0.0) {
        return Err(Error::Numerical(format!(
            "leaf weight undefined for H + lambda = {denom}"
        )));
    }
    Ok(-g / denom)
}

/// Reduction of the regularized objective from splitting a node into
/// (G_L, H_L) and (G_R, H_R), minus the split penalty γ.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub threshold: f64,
    pub gain: f64,
    pub default_left: bool,
}

/// Scans `(value, g, h)` entries sorted by value (missing rows excluded and
/// summarized by `missing`). Thresholds are midpoints between adjacent
/// distinct values; the earliest threshold wins ties, and at one threshold
/// sending missing rows left wins ties.
pub(crate) fn scan_sorted(
    entries: &[(f64, f64, f64)],
    missing: (f64, f64),
    reg: Regularization,
) -> Option<SplitChoice> {
    let (total_g, total_h) = entries
        .iter()
        .fold((0.0, 0.0), |(g, h), e| (g + e.1, h + e.2));
    let has_missing = missing.1 > 0.0;
    let mut best: Option<SplitChoice> = None;
    let (mut gl, mut hl) = (0.0, 0.0);
    for k in 0..entries.len().saturating_sub(1) {
        gl += entries[k].1;
        hl += entries[k].2;
        let (v, next) = (entries[k].0, entries[k + 1].0);
        if v >= next {
            continue;
        }
        let (gr, hr) = (total_g - gl, total_h - hl);
        let directions: &[bool] = if has_missing { &[true, false] } else { &[true] };
        for &default_left in directions {
            let (l, r) = if default_left {
                ((gl + missing.0, hl + missing.1), (gr, hr))
            } else {
                ((gl, hl), (gr + missing.0, hr + missing.1))
            };
            if l.1 < reg.min_child_weight || r.1 < reg.min_child_weight {
                continue;
            }
            if !(l.1 + reg.lambda > 0.0 && r.1 + reg.lambda > 0.0) {
                continue;
            }
            let gain = split_gain(l.0, l.1, r.0, r.1, reg.lambda, reg.gamma);
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    threshold: v + (next - v) / 2.0,
                    gain,
                    default_left,
                });
            }
        }
    }
    best.filter(|b| b.gain > 0.0)
}

/// Best threshold for one feature column sorted ascending, with aligned
/// gradients and hessians. `None` when no admissible split has positive gain.
pub fn best_split(
    sorted_column: &[f64],
    gradients: &[f64],
    hessians: &[f64],
    lambda: f64,
    gamma: f64,
    min_child_weight: f64,
) -> Option<(f64, f64)> {
    if sorted_column.len() != gradients.len() || sorted_column.len() != hessians.len() {
        return None;
    }
    debug_assert!(sorted_column.windows(2).all(|w| w[0] <= w[1]));
    let entries: Vec<(f64, f64, f64)> = sorted_column
        .iter()
        .zip(gradients)
        .zip(hessians)
        .map(|((&v, &g), &h)| (v, g, h))
        .collect();
    let reg = Regularization {
        lambda,
        gamma,
        min_child_weight,
    };
    scan_sorted(&entries, (0.0, 0.0), reg).map(|c| (c.threshold, c.gain))
}
