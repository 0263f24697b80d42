//! The memory game: sequence construction and validation, session scoring,
//! aggregation into memorability scores, synthetic observers and the
//! display-order study.

mod order_study;
mod scoring;
mod sequence;
mod simulate;
mod types;

pub use order_study::{order_study_report, OrderStudyReport, RhoSummary};
pub use scoring::{aggregate_scored, aggregate_scores, score_session};
pub use sequence::{effective_seed, generate_sequence, validate_sequence, Violation, MAX_PLACEMENT_ATTEMPTS};
pub use simulate::{alternating_order_effects, simulate_sessions, simulation_pool, OrderEffect, SimulationParams, P_MAX, P_MIN};
pub use types::{
    Attentiveness, MemorabilityTable, OrderMode, Presentation, ResponseEvent, Role, SequenceParams,
    SessionRecord, SessionScore, Spacing, StimulusItem, TableRow, TrialSequence,
};
