use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scoring::aggregate_scores;
use super::types::{Attentiveness, MemorabilityTable, SessionRecord, TrialSequence};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{
    collect_splits, mean_and_population_std, paired_rho, split_half_consistency, ConsistencyReport,
    ResponseMatrix,
};

const CROSS_SALT: u64 = 0xc055;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSummary {
    pub mean_rho: f64,
    pub sigma_rho: f64,
    pub n_splits: usize,
    pub resampled: usize,
}

impl RhoSummary {
    fn new(rhos: &[f64], resampled: usize) -> Self {
        let (mean_rho, sigma_rho) = mean_and_population_std(rhos);
        Self {
            mean_rho,
            sigma_rho,
            n_splits: rhos.len(),
            resampled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStudyReport {
    pub order_ids: Vec<u32>,
    pub group_size: usize,
    pub seed: u64,
    pub per_order_tables: BTreeMap<u32, MemorabilityTable>,
    /// Split-half consistency inside each order.
    pub per_order_consistency: BTreeMap<u32, ConsistencyReport>,
    /// Pooled over the per-order splits.
    pub within_order: RhoSummary,
    pub cross_order: RhoSummary,
}

type Session = (TrialSequence, SessionRecord);

/// Compares consistency of groups that saw the same fixed order with groups
/// that saw different orders.
///
/// Within-order: split-half consistency at `group_size` inside every order,
/// pooled. Cross-order: `n_splits` random pairings, each drawing two distinct
/// orders and a group of `group_size` attentive participants from each, and
/// correlating the two groups' scores over their common targets.
pub fn order_study_report(
    grouped: &BTreeMap<u32, Vec<Session>>,
    group_size: usize,
    n_splits: usize,
    attentiveness: &Attentiveness,
    seed: u64,
) -> Result<OrderStudyReport> {
    if grouped.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "order study needs at least two orders, got {}",
            grouped.len()
        )));
    }
    let mut tables = BTreeMap::new();
    let mut matrices: Vec<(u32, ResponseMatrix)> = Vec::new();
    for (&order, sessions) in grouped {
        let (table, m) = aggregate_scores(sessions.iter().map(|(s, r)| (s, r)), attentiveness)?;
        if m.n_participants() < 2 * group_size {
            return Err(Error::InsufficientParticipants {
                needed: 2 * group_size,
                available: m.n_participants(),
            });
        }
        tables.insert(order, table);
        matrices.push((order, m));
    }

    let mut per_order = BTreeMap::new();
    let mut within = Vec::new();
    let mut within_resampled = 0;
    for (order, m) in &matrices {
        let r = split_half_consistency(m, group_size, n_splits, derive_seed(seed, u64::from(*order)))?;
        within.extend_from_slice(&r.per_split_rhos);
        within_resampled += r.resampled;
        per_order.insert(*order, r);
    }

    let cross_seed = derive_seed(seed, CROSS_SALT);
    let (cross, cross_resampled) = collect_splits(n_splits, |attempt| {
        let mut rng = stream_rng(cross_seed, attempt as u64);
        let a = rng.random_range(0..matrices.len());
        let b = (a + 1 + rng.random_range(0..matrices.len() - 1)) % matrices.len();
        let (ma, mb) = (&matrices[a].1, &matrices[b].1);
        let ga = sample(&mut rng, ma.n_participants(), group_size).into_vec();
        let gb = sample(&mut rng, mb.n_participants(), group_size).into_vec();
        let (sa, sb) = (ma.group_means(&ga), mb.group_means(&gb));
        let aligned_b: Vec<Option<f64>> = ma
            .target_ids()
            .iter()
            .map(|t| mb.target_index(t).and_then(|j| sb[j]))
            .collect();
        paired_rho(&sa, &aligned_b)
    })?;

    Ok(OrderStudyReport {
        order_ids: grouped.keys().copied().collect(),
        group_size,
        seed,
        per_order_tables: tables,
        per_order_consistency: per_order,
        within_order: RhoSummary::new(&within, within_resampled),
        cross_order: RhoSummary::new(&cross, cross_resampled),
    })
}

#[cfg(test)]
mod tests {
    use super::super::types::{Presentation, ResponseEvent, Role, SequenceParams};
    use super::*;

    fn seq(order: u32) -> TrialSequence {
        let ids = ["a", "b", "c", "a", "b", "c"];
        TrialSequence {
            sequence_id: format!("order-{order}"),
            seed: 0,
            presentations: ids
                .iter()
                .enumerate()
                .map(|(i, id)| Presentation {
                    slot_index: i,
                    item_id: id.to_string(),
                    image_uri: String::new(),
                    role: Role::Target,
                    is_repeat: i >= 3,
                })
                .collect(),
            params: SequenceParams {
                n_targets: 3,
                order_mode: super::super::types::OrderMode::FixedOrder(order),
                ..Default::default()
            },
        }
    }

    fn sessions(order: u32, n: usize, hit_slots: &[usize]) -> Vec<Session> {
        (0..n)
            .map(|i| {
                let sid = format!("o{order}-{i}");
                let rec = SessionRecord {
                    session_id: sid.clone(),
                    participant_id: format!("p{i}"),
                    sequence_id: format!("order-{order}"),
                    events: hit_slots
                        .iter()
                        .map(|&s| ResponseEvent {
                            session_id: sid.clone(),
                            slot_index: s,
                            pressed: true,
                            latency_ms: 500,
                        })
                        .collect(),
                    completed: true,
                };
                (seq(order), rec)
            })
            .collect()
    }

    #[test]
    fn duplicated_orders_correlate_perfectly() {
        // a and b hit by everyone, c by no one: any group yields (1, 1, 0)
        let mut grouped = BTreeMap::new();
        grouped.insert(1, sessions(1, 4, &[3, 4]));
        grouped.insert(2, sessions(2, 4, &[3, 4]));
        let r = order_study_report(&grouped, 2, 1, &Attentiveness::default(), 5).unwrap();
        assert_eq!(r.cross_order.n_splits, 1);
        assert_eq!(r.cross_order.mean_rho, 1.0);
        assert_eq!(r.within_order.mean_rho, 1.0);
        assert_eq!(r.order_ids, vec![1, 2]);
    }

    #[test]
    fn needs_two_orders_and_enough_participants() {
        let mut grouped = BTreeMap::new();
        grouped.insert(1, sessions(1, 4, &[3]));
        assert!(matches!(
            order_study_report(&grouped, 2, 1, &Attentiveness::default(), 0),
            Err(Error::InvalidInput(_))
        ));
        grouped.insert(2, sessions(2, 3, &[3]));
        assert!(matches!(
            order_study_report(&grouped, 2, 1, &Attentiveness::default(), 0),
            Err(Error::InsufficientParticipants { needed: 4, available: 3 })
        ));
    }
}
