//! Image-memorability workbench.
//!
//! * [`game`]: memory-game sequences, scoring, simulated observers, order study.
//! * [`stats`]: rank correlation, split-half consistency, group variance.
//! * [`gbt`]: second-order gradient-boosted regression trees.
//! * [`eval`]: repeated train/test evaluation and error-difference analysis.
//! * [`formats`]: on-disk formats shared by the CLI and the server.

pub mod error;
pub mod eval;
pub mod formats;
pub mod game;
pub mod gbt;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
