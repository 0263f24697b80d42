use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Filler,
    VigilanceFiller,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Target => "target",
            Role::Filler => "filler",
            Role::VigilanceFiller => "vigilance_filler",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "target" => Ok(Role::Target),
            "filler" => Ok(Role::Filler),
            "vigilance_filler" | "vigilance" => Ok(Role::VigilanceFiller),
            other => Err(Error::InvalidInput(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusItem {
    pub item_id: String,
    pub image_uri: String,
    pub role: Role,
}

impl StimulusItem {
    pub fn new(item_id: impl Into<String>, image_uri: impl Into<String>, role: Role) -> Self {
        Self {
            item_id: item_id.into(),
            image_uri: image_uri.into(),
            role,
        }
    }
}

/// Inclusive range of slot distances between an item's first and second showing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spacing {
    pub min: usize,
    pub max: usize,
}

impl Spacing {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, d: usize) -> bool {
        (self.min..=self.max).contains(&d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderMode {
    Randomized,
    /// Every sequence with the same order id has the same presentation order.
    FixedOrder(u32),
}

impl OrderMode {
    pub fn order_id(self) -> Option<u32> {
        match self {
            OrderMode::Randomized => None,
            OrderMode::FixedOrder(id) => Some(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceParams {
    pub n_targets: usize,
    pub n_fillers: usize,
    pub n_vigilance: usize,
    pub target_spacing: Spacing,
    pub vigilance_spacing: Spacing,
    pub display_ms: u32,
    pub gap_ms: u32,
    pub order_mode: OrderMode,
}

impl Default for SequenceParams {
    fn default() -> Self {
        Self {
            n_targets: 0,
            n_fillers: 0,
            n_vigilance: 0,
            target_spacing: Spacing::new(36, 108),
            vigilance_spacing: Spacing::new(1, 7),
            display_ms: 1000,
            gap_ms: 1400,
            order_mode: OrderMode::Randomized,
        }
    }
}

impl SequenceParams {
    pub fn total_slots(&self) -> usize {
        2 * self.n_targets + self.n_fillers + 2 * self.n_vigilance
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("target_spacing", self.target_spacing),
            ("vigilance_spacing", self.vigilance_spacing),
        ] {
            if s.min < 1 || s.min > s.max {
                return Err(Error::InvalidInput(format!(
                    "{name} must satisfy 1 <= min <= max, got ({}, {})",
                    s.min, s.max
                )));
            }
        }
        if self.display_ms == 0 || self.gap_ms == 0 {
            return Err(Error::InvalidInput("durations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub slot_index: usize,
    pub item_id: String,
    pub image_uri: String,
    pub role: Role,
    pub is_repeat: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSequence {
    pub sequence_id: String,
    pub seed: u64,
    pub presentations: Vec<Presentation>,
    pub params: SequenceParams,
}

impl TrialSequence {
    pub fn len(&self) -> usize {
        self.presentations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.presentations.is_empty()
    }

    pub fn order_id(&self) -> Option<u32> {
        self.params.order_mode.order_id()
    }

    /// Target item ids in order of first appearance.
    pub fn target_ids(&self) -> Vec<&str> {
        self.presentations
            .iter()
            .filter(|p| p.role == Role::Target && !p.is_repeat)
            .map(|p| p.item_id.as_str())
            .collect()
    }
}

/// A keypress (or an explicit non-press) attributed to a slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseEvent {
    pub session_id: String,
    pub slot_index: usize,
    pub pressed: bool,
    /// Milliseconds from stimulus onset, measured by the client.
    pub latency_ms: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub participant_id: String,
    pub sequence_id: String,
    pub events: Vec<ResponseEvent>,
    pub completed: bool,
}

/// Exclusion thresholds for inattentive participants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Attentiveness {
    pub min_vigilance_hit_rate: f64,
    pub max_false_alarm_rate: f64,
}

impl Default for Attentiveness {
    fn default() -> Self {
        Self {
            min_vigilance_hit_rate: 0.5,
            max_false_alarm_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScore {
    pub session_id: String,
    pub participant_id: String,
    pub sequence_id: String,
    /// Target id → detected its repeat.
    pub target_hits: BTreeMap<String, bool>,
    pub false_alarm_rate: f64,
    pub vigilance_hit_rate: f64,
    pub attentive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub item_id: String,
    pub score: f64,
    pub hits: usize,
    pub n_observers: usize,
    /// Variance of the per-observer hit indicator, `score * (1 - score)`.
    pub variance: f64,
    /// Mean false-alarm rate of the observers behind this row.
    pub false_alarms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MemorabilityTable {
    pub rows: Vec<TableRow>,
}

impl MemorabilityTable {
    pub fn get(&self, item_id: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.item_id == item_id)
    }

    pub fn scores(&self) -> BTreeMap<&str, f64> {
        self.rows.iter().map(|r| (r.item_id.as_str(), r.score)).collect()
    }
}
