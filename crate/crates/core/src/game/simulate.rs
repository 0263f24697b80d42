use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sequence::generate_sequence;
use super::types::{ResponseEvent, Role, SequenceParams, SessionRecord, StimulusItem, TrialSequence};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

/// Hit probabilities are clipped into this range before sampling.
pub const P_MIN: f64 = 0.01;
pub const P_MAX: f64 = 0.99;

/// Synthetic observer behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub sequence: SequenceParams,
    /// Press probability on any non-repeat slot.
    pub false_alarm_prob: f64,
    /// Press probability on a vigilance repeat.
    pub vigilance_prob: f64,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            sequence: SequenceParams::default(),
            false_alarm_prob: 0.05,
            vigilance_prob: 0.9,
        }
    }
}

/// Per-(order id, item) shift of the hit probability.
pub type OrderEffect = BTreeMap<(u32, String), f64>;

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Pool used by the simulator: the scored targets plus generated fillers.
pub fn simulation_pool(true_scores: &BTreeMap<String, f64>, params: &SequenceParams) -> Vec<StimulusItem> {
    let targets = true_scores
        .keys()
        .map(|id| StimulusItem::new(id.clone(), format!("{id}.jpg"), Role::Target));
    let fillers = (0..params.n_fillers)
        .map(|i| StimulusItem::new(format!("filler-{i:04}"), format!("filler-{i:04}.jpg"), Role::Filler));
    let vigilance = (0..params.n_vigilance).map(|i| {
        StimulusItem::new(format!("vigil-{i:04}"), format!("vigil-{i:04}.jpg"), Role::VigilanceFiller)
    });
    targets.chain(fillers).chain(vigilance).collect()
}

/// Plays `n_participants` synthetic observers through memory-game sequences.
///
/// Each observer gets a sequence from `params.sequence` (a fresh random one
/// in `Randomized` mode, the shared one in `FixedOrder` mode) and presses on
/// a target's repeat with probability `p` (plus the order effect for the
/// sequence's order id, clipped to `[P_MIN, P_MAX]`), on vigilance repeats
/// with `vigilance_prob` and elsewhere with `false_alarm_prob`. Only presses
/// are recorded as events.
pub fn simulate_sessions(
    true_scores: &BTreeMap<String, f64>,
    n_participants: usize,
    order_effect: Option<&OrderEffect>,
    params: &SimulationParams,
    seed: u64,
) -> Result<Vec<(TrialSequence, SessionRecord)>> {
    if n_participants == 0 {
        return Err(Error::InvalidInput("need at least one participant".into()));
    }
    for (id, &p) in true_scores {
        check_prob(&format!("true score of {id}"), p)?;
    }
    check_prob("false_alarm_prob", params.false_alarm_prob)?;
    check_prob("vigilance_prob", params.vigilance_prob)?;
    if let Some(effects) = order_effect {
        if let Some(((o, id), d)) = effects.iter().find(|(_, d)| !d.is_finite()) {
            return Err(Error::InvalidInput(format!("order effect for ({o}, {id}) is {d}")));
        }
    }

    let pool = simulation_pool(true_scores, &params.sequence);
    let fixed = match params.sequence.order_mode.order_id() {
        Some(_) => Some(generate_sequence(&pool, &params.sequence, seed)?),
        None => None,
    };

    (0..n_participants)
        .map(|i| {
            let unit = derive_seed(seed, i as u64);
            let seq = match &fixed {
                Some(s) => s.clone(),
                None => generate_sequence(&pool, &params.sequence, unit)?,
            };
            let order = seq.order_id();
            let mut rng = stream_rng(unit, 1);
            let session_id = format!("sim-{seed:x}-{i:05}");
            let mut events = Vec::new();
            for p in &seq.presentations {
                let prob = match (p.role, p.is_repeat) {
                    (Role::Target, true) => {
                        let delta = order
                            .and_then(|o| order_effect?.get(&(o, p.item_id.clone())).copied())
                            .unwrap_or(0.0);
                        (true_scores[&p.item_id] + delta).clamp(P_MIN, P_MAX)
                    }
                    (Role::VigilanceFiller, true) => params.vigilance_prob,
                    _ => params.false_alarm_prob,
                };
                // both draws always happen so streams stay aligned across settings
                let press = rng.random::<f64>() < prob;
                let latency = rng.random_range(300..900);
                if press {
                    events.push(ResponseEvent {
                        session_id: session_id.clone(),
                        slot_index: p.slot_index,
                        pressed: true,
                        latency_ms: latency,
                    });
                }
            }
            let rec = SessionRecord {
                session_id,
                participant_id: format!("p{i:05}"),
                sequence_id: seq.sequence_id.clone(),
                events,
                completed: true,
            };
            Ok((seq, rec))
        })
        .collect()
}

/// Display-order effects for a study over `order_ids`: a `fraction` of the
/// items (chosen by `seed`) each get a random sign, and their delta is
/// `sign * magnitude` in even-positioned orders and `-sign * magnitude` in
/// odd-positioned ones, so consecutive orders shift an affected item in
/// opposite directions.
pub fn alternating_order_effects(
    item_ids: &[String],
    order_ids: &[u32],
    magnitude: f64,
    fraction: f64,
    seed: u64,
) -> Result<OrderEffect> {
    check_prob("fraction", fraction)?;
    if !magnitude.is_finite() {
        return Err(Error::InvalidInput(format!("order effect magnitude is {magnitude}")));
    }
    let mut rng = stream_rng(seed, 0);
    let n_affected = (item_ids.len() as f64 * fraction).round() as usize;
    let mut chosen = rand::seq::index::sample(&mut rng, item_ids.len(), n_affected).into_vec();
    chosen.sort_unstable();
    let mut effects = OrderEffect::new();
    for i in chosen {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for (k, &order) in order_ids.iter().enumerate() {
            let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
            effects.insert((order, item_ids[i].clone()), sign * alt * magnitude);
        }
    }
    Ok(effects)
}

#[cfg(test)]
mod tests {
    use super::super::scoring::aggregate_scores;
    use super::super::types::{Attentiveness, OrderMode, Spacing};
    use super::*;

    fn params(order_mode: OrderMode) -> SimulationParams {
        SimulationParams {
            sequence: SequenceParams {
                n_targets: 3,
                n_fillers: 10,
                n_vigilance: 3,
                target_spacing: Spacing::new(4, 12),
                order_mode,
                ..Default::default()
            },
            vigilance_prob: 0.97,
            ..Default::default()
        }
    }

    fn scores(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn extreme_scores_concentrate() {
        let ts = scores(&[("always", 1.0), ("never", 0.0), ("mid", 0.5)]);
        let sessions = simulate_sessions(&ts, 1000, None, &params(OrderMode::Randomized), 5).unwrap();
        let (table, _) =
            aggregate_scores(sessions.iter().map(|(s, r)| (s, r)), &Attentiveness::default()).unwrap();
        let always = table.get("always").unwrap().score;
        let never = table.get("never").unwrap().score;
        assert!((0.97..=1.0).contains(&always), "{always}");
        assert!((0.0..=0.03).contains(&never), "{never}");
    }

    #[test]
    fn order_effect_shifts_one_order() {
        let ts = scores(&[("kitchen", 0.6), ("lighthouse", 0.8), ("door", 0.4)]);
        let mut effect = OrderEffect::new();
        effect.insert((2, "kitchen".to_string()), 0.3);
        let table = |order| {
            let s = simulate_sessions(&ts, 500, Some(&effect), &params(OrderMode::FixedOrder(order)), 11)
                .unwrap();
            aggregate_scores(s.iter().map(|(s, r)| (s, r)), &Attentiveness::default())
                .unwrap()
                .0
        };
        let (a, b) = (table(1), table(2));
        let diff = b.get("kitchen").unwrap().score - a.get("kitchen").unwrap().score;
        assert!((diff - 0.3).abs() <= 0.05, "{diff}");
    }

    #[test]
    fn alternating_effects_cover_the_fraction() {
        let ids: Vec<String> = (0..10).map(|i| format!("i{i}")).collect();
        let e = alternating_order_effects(&ids, &[1, 2], 0.3, 0.5, 4).unwrap();
        assert_eq!(e.len(), 10);
        for id in &ids {
            if let Some(d1) = e.get(&(1, id.clone())) {
                assert_eq!(d1.abs(), 0.3);
                assert_eq!(e[&(2, id.clone())], -d1);
            }
        }
        assert!(alternating_order_effects(&ids, &[1], 0.3, 1.5, 4).is_err());
    }

    #[test]
    fn deterministic_and_validated() {
        let ts = scores(&[("a", 0.3), ("b", 0.7), ("c", 0.5)]);
        let p = params(OrderMode::Randomized);
        assert_eq!(
            simulate_sessions(&ts, 20, None, &p, 3).unwrap(),
            simulate_sessions(&ts, 20, None, &p, 3).unwrap()
        );
        assert!(simulate_sessions(&scores(&[("a", 1.5)]), 1, None, &p, 0).is_err());
        assert!(simulate_sessions(&ts, 0, None, &p, 0).is_err());
        let bad = SimulationParams {
            false_alarm_prob: -0.1,
            ..p
        };
        assert!(simulate_sessions(&ts, 1, None, &bad, 0).is_err());
    }
}
