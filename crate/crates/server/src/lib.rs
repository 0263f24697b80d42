//! Memory-game experiment service.
//!
//! Every experiment owns a directory holding an append-only event log
//! (`events.jsonl`) and an optional snapshot (`snapshot.json`). State is only
//! ever changed by applying log entries, so a restart that replays the log
//! rebuilds exactly the state that was served.

pub mod api;
pub mod clock;
pub mod error;
pub mod log;
pub mod state;
pub mod store;

pub use api::{router, serve};
pub use clock::{Clock, ManualClock, SystemClock};
pub use error::{Result, ServerError};
pub use log::{EventLog, EventLogEntry};
pub use state::{ExperimentConfig, ExperimentState, Payload, SessionState};
pub use store::{
    replay_log, CreateExperiment, ExperimentSummary, ExportFormat, ExportPart, ExportRecord,
    ResponseAck, ResponseIn, SessionDescriptor, SlotView, Store, StoreOptions,
};
