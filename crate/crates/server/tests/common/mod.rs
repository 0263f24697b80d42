#![allow(dead_code)]

use memorability::game::{
    generate_sequence, OrderMode, Role, SequenceParams, Spacing, StimulusItem, TrialSequence,
};
use memorability_server::{CreateExperiment, Store, StoreOptions};

pub fn pool() -> Vec<StimulusItem> {
    let mut p = Vec::new();
    for i in 0..4 {
        p.push(StimulusItem::new(format!("t{i}"), format!("/stimuli/t{i}.jpg"), Role::Target));
    }
    for i in 0..12 {
        p.push(StimulusItem::new(format!("f{i}"), format!("/stimuli/f{i}.jpg"), Role::Filler));
    }
    for i in 0..2 {
        p.push(StimulusItem::new(format!("v{i}"), format!("/stimuli/v{i}.jpg"), Role::VigilanceFiller));
    }
    p
}

pub fn params(order_mode: OrderMode) -> SequenceParams {
    SequenceParams {
        n_targets: 4,
        n_fillers: 12,
        n_vigilance: 2,
        target_spacing: Spacing::new(3, 8),
        vigilance_spacing: Spacing::new(1, 3),
        display_ms: 600,
        gap_ms: 800,
        order_mode,
    }
}

pub fn request(id: &str, order_mode: OrderMode, max_sessions: usize) -> CreateExperiment {
    CreateExperiment {
        experiment_id: id.into(),
        pool_manifest: None,
        pool: Some(pool()),
        params: params(order_mode),
        attentiveness: Default::default(),
        max_sessions,
        seed: 42,
    }
}

/// The schedule every FixedOrder(1) session receives, built independently.
pub fn fixed_sequence() -> TrialSequence {
    generate_sequence(&pool(), &params(OrderMode::FixedOrder(1)), 0).unwrap()
}

pub fn repeat_slots(seq: &TrialSequence, role: Role) -> Vec<usize> {
    seq.presentations
        .iter()
        .filter(|p| p.role == role && p.is_repeat)
        .map(|p| p.slot_index)
        .collect()
}

pub fn repeat_slot_of(seq: &TrialSequence, item: &str) -> usize {
    seq.presentations
        .iter()
        .find(|p| p.item_id == item && p.is_repeat)
        .unwrap()
        .slot_index
}

pub fn options(snapshot_every: usize) -> StoreOptions {
    StoreOptions {
        snapshot_every,
        fsync: false,
        ..StoreOptions::default()
    }
}

pub fn open(dir: &std::path::Path, snapshot_every: usize) -> Store {
    Store::open(dir, options(snapshot_every)).unwrap()
}
