use std::collections::BTreeMap;

use rand::seq::{index::sample, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::{OrderMode, Presentation, Role, SequenceParams, Spacing, StimulusItem, TrialSequence};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

/// Randomized placement attempts before a parameter set is declared infeasible.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

const FIXED_ORDER_SALT: u64 = 0x006f_7264_6572;

/// Seed that drives the arrangement of a sequence.
pub fn effective_seed(mode: OrderMode, seed: u64) -> u64 {
    match mode {
        OrderMode::Randomized => seed,
        OrderMode::FixedOrder(id) => derive_seed(FIXED_ORDER_SALT, u64::from(id)),
    }
}

fn pick<'a>(
    pool: &'a [StimulusItem],
    role: Role,
    n: usize,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Vec<&'a StimulusItem>> {
    let of_role: Vec<&StimulusItem> = pool.iter().filter(|i| i.role == role).collect();
    if of_role.len() < n {
        return Err(Error::InvalidInput(format!(
            "pool has {} {} items, {n} requested",
            of_role.len(),
            role.as_str()
        )));
    }
    Ok(match rng {
        Some(rng) => sample(rng, of_role.len(), n).iter().map(|i| of_role[i]).collect(),
        None => of_role.into_iter().take(n).collect(),
    })
}

#[derive(Clone, Copy)]
enum Slot {
    Free,
    First(Role, usize),
    Repeat(Role, usize),
    Filler(usize),
}

/// One randomized left-to-right placement pass. Returns `None` on a dead end.
fn try_place(params: &SequenceParams, rng: &mut ChaCha8Rng) -> Option<Vec<Slot>> {
    let len = params.total_slots();
    let mut slots = vec![Slot::Free; len];
    let (mut t_left, mut v_left, mut f_left) = (params.n_targets, params.n_vigilance, params.n_fillers);
    let (mut next_t, mut next_v, mut next_f) = (0, 0, 0);

    let free_before = |slots: &[Slot], from: usize, end: usize| {
        slots[from..end.max(from)]
            .iter()
            .filter(|s| matches!(s, Slot::Free))
            .count()
    };
    let lags = |slots: &[Slot], i: usize, s: Spacing| -> Vec<usize> {
        (s.min..=s.max)
            .take_while(|d| i + d < len)
            .filter(|d| matches!(slots[i + d], Slot::Free))
            .collect()
    };

    for i in 0..len {
        if !matches!(slots[i], Slot::Free) {
            continue;
        }
        let t_lags = if t_left > 0 { lags(&slots, i, params.target_spacing) } else { vec![] };
        let v_lags = if v_left > 0 { lags(&slots, i, params.vigilance_spacing) } else { vec![] };

        // A pair must start no later than len-1-min; once the remaining start
        // positions only just cover the remaining pairs, starting is forced.
        let t_forced = t_left > 0
            && t_left >= free_before(&slots, i, len.saturating_sub(params.target_spacing.min));
        let v_forced = v_left > 0
            && v_left >= free_before(&slots, i, len.saturating_sub(params.vigilance_spacing.min));

        let choice = if t_forced && !t_lags.is_empty() {
            Role::Target
        } else if v_forced && !v_lags.is_empty() {
            Role::VigilanceFiller
        } else if t_forced || v_forced {
            return None;
        } else {
            let wt = if t_lags.is_empty() { 0 } else { t_left };
            let wv = if v_lags.is_empty() { 0 } else { v_left };
            let total = wt + wv + f_left;
            if total == 0 {
                return None;
            }
            let r = rng.random_range(0..total);
            if r < wt {
                Role::Target
            } else if r < wt + wv {
                Role::VigilanceFiller
            } else {
                Role::Filler
            }
        };

        match choice {
            Role::Target => {
                let d = t_lags[rng.random_range(0..t_lags.len())];
                slots[i] = Slot::First(Role::Target, next_t);
                slots[i + d] = Slot::Repeat(Role::Target, next_t);
                next_t += 1;
                t_left -= 1;
            }
            Role::VigilanceFiller => {
                let d = v_lags[rng.random_range(0..v_lags.len())];
                slots[i] = Slot::First(Role::VigilanceFiller, next_v);
                slots[i + d] = Slot::Repeat(Role::VigilanceFiller, next_v);
                next_v += 1;
                v_left -= 1;
            }
            Role::Filler => {
                slots[i] = Slot::Filler(next_f);
                next_f += 1;
                f_left -= 1;
            }
        }
    }
    (t_left == 0 && v_left == 0 && f_left == 0).then_some(slots)
}

/// Builds a memory-game sequence: every target and vigilance filler is shown
/// twice within its spacing window, every plain filler once.
///
/// In `Randomized` mode items are sampled from the pool and arranged using
/// `seed`. In `FixedOrder(id)` mode the first items of each role in pool order
/// are used and the arrangement depends only on `id`, so every call with the
/// same order id yields the same presentation order.
pub fn generate_sequence(
    pool: &[StimulusItem],
    params: &SequenceParams,
    seed: u64,
) -> Result<TrialSequence> {
    params.validate()?;
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = pool.iter().find(|i| !seen.insert(i.item_id.as_str())) {
        return Err(Error::InvalidInput(format!("duplicate item id {}", dup.item_id)));
    }

    let eff = effective_seed(params.order_mode, seed);
    let mut select_rng = stream_rng(eff, 0);
    let randomized = params.order_mode == OrderMode::Randomized;
    let mut chooser = |role, n| pick(pool, role, n, randomized.then_some(&mut select_rng));
    let mut targets = chooser(Role::Target, params.n_targets)?;
    let mut fillers = chooser(Role::Filler, params.n_fillers)?;
    let mut vigilance = chooser(Role::VigilanceFiller, params.n_vigilance)?;

    let mut slots = None;
    for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut rng = stream_rng(eff, attempt as u64 + 1);
        if let Some(s) = try_place(params, &mut rng) {
            targets.shuffle(&mut rng);
            fillers.shuffle(&mut rng);
            vigilance.shuffle(&mut rng);
            slots = Some(s);
            break;
        }
    }
    let slots = slots.ok_or_else(|| {
        Error::InfeasibleSequence(format!(
            "no placement of {} targets (spacing {}..={}), {} vigilance pairs (spacing {}..={}) and {} fillers in {} slots after {} attempts",
            params.n_targets,
            params.target_spacing.min,
            params.target_spacing.max,
            params.n_vigilance,
            params.vigilance_spacing.min,
            params.vigilance_spacing.max,
            params.n_fillers,
            params.total_slots(),
            MAX_PLACEMENT_ATTEMPTS
        ))
    })?;

    let presentations = slots
        .into_iter()
        .enumerate()
        .map(|(slot_index, s)| {
            let (item, is_repeat) = match s {
                Slot::First(Role::Target, k) => (targets[k], false),
                Slot::Repeat(Role::Target, k) => (targets[k], true),
                Slot::First(_, k) => (vigilance[k], false),
                Slot::Repeat(_, k) => (vigilance[k], true),
                Slot::Filler(k) => (fillers[k], false),
                Slot::Free => unreachable!("placement fills every slot"),
            };
            Presentation {
                slot_index,
                item_id: item.item_id.clone(),
                image_uri: item.image_uri.clone(),
                role: item.role,
                is_repeat,
            }
        })
        .collect();

    let sequence_id = match params.order_mode {
        OrderMode::FixedOrder(id) => format!("order-{id}"),
        OrderMode::Randomized => format!("seq-{eff:016x}"),
    };
    Ok(TrialSequence {
        sequence_id,
        seed: eff,
        presentations,
        params: params.clone(),
    })
}

/// A broken sequence rule, with the offending slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    NonContiguousSlot { position: usize, slot_index: usize },
    MissingRepeat { item_id: String, slot: usize },
    TooManyShowings { item_id: String, role: Role, slots: Vec<usize> },
    SpacingViolation { item_id: String, role: Role, first: usize, repeat: usize, min: usize, max: usize },
    RepeatFlagMismatch { item_id: String, slot: usize },
    RoleConflict { item_id: String, slots: Vec<usize> },
    CountMismatch { role: Role, expected: usize, found: usize },
}

/// Checks every sequence invariant; an empty list means the sequence is valid.
pub fn validate_sequence(seq: &TrialSequence) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut by_item: BTreeMap<&str, Vec<&Presentation>> = BTreeMap::new();
    for (position, p) in seq.presentations.iter().enumerate() {
        if p.slot_index != position {
            out.push(Violation::NonContiguousSlot {
                position,
                slot_index: p.slot_index,
            });
        }
        by_item.entry(&p.item_id).or_default().push(p);
    }

    let mut counts: BTreeMap<Role, usize> = BTreeMap::new();
    for (item, shows) in &by_item {
        let slots: Vec<usize> = shows.iter().map(|p| p.slot_index).collect();
        let role = shows[0].role;
        if shows.iter().any(|p| p.role != role) {
            out.push(Violation::RoleConflict {
                item_id: item.to_string(),
                slots,
            });
            continue;
        }
        *counts.entry(role).or_default() += 1;

        let expected_repeats = [false, true];
        let max_shows = if role == Role::Filler { 1 } else { 2 };
        if shows.len() > max_shows {
            out.push(Violation::TooManyShowings {
                item_id: item.to_string(),
                role,
                slots: slots.clone(),
            });
            continue;
        }
        for (k, p) in shows.iter().enumerate() {
            if p.is_repeat != expected_repeats[k] {
                out.push(Violation::RepeatFlagMismatch {
                    item_id: item.to_string(),
                    slot: p.slot_index,
                });
            }
        }
        if role == Role::Filler {
            continue;
        }
        if shows.len() == 1 {
            out.push(Violation::MissingRepeat {
                item_id: item.to_string(),
                slot: slots[0],
            });
            continue;
        }
        let spacing = if role == Role::Target {
            seq.params.target_spacing
        } else {
            seq.params.vigilance_spacing
        };
        let d = slots[1].abs_diff(slots[0]);
        if !spacing.contains(d) {
            out.push(Violation::SpacingViolation {
                item_id: item.to_string(),
                role,
                first: slots[0],
                repeat: slots[1],
                min: spacing.min,
                max: spacing.max,
            });
        }
    }

    for (role, expected) in [
        (Role::Target, seq.params.n_targets),
        (Role::Filler, seq.params.n_fillers),
        (Role::VigilanceFiller, seq.params.n_vigilance),
    ] {
        let found = counts.get(&role).copied().unwrap_or(0);
        if found != expected {
            out.push(Violation::CountMismatch { role, expected, found });
        }
    }
    out
}
