use std::collections::{BTreeMap, HashMap};

use memorability::game::{
    score_session, Attentiveness, ResponseEvent, SequenceParams, SessionRecord, SessionScore,
    StimulusItem, TrialSequence,
};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    /// Manifest the pool was loaded from, if any.
    pub pool_manifest: Option<String>,
    pub params: SequenceParams,
    pub attentiveness: Attentiveness,
    pub max_sessions: usize,
    /// Base seed for per-session sequence seeds.
    pub seed: u64,
}

/// State changes recorded in the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    ExperimentCreated {
        config: ExperimentConfig,
        pool: Vec<StimulusItem>,
    },
    SessionCreated {
        session_id: String,
        participant_id: String,
        sequence: TrialSequence,
    },
    ResponseRecorded {
        event: ResponseEvent,
    },
    SessionCompleted {
        score: SessionScore,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub participant_id: String,
    pub sequence: TrialSequence,
    pub responses: BTreeMap<usize, ResponseEvent>,
    pub score: Option<SessionScore>,
}

impl SessionState {
    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            session_id: self.session_id.clone(),
            participant_id: self.participant_id.clone(),
            sequence_id: self.sequence.sequence_id.clone(),
            events: self.responses.values().cloned().collect(),
            completed: self.score.is_some(),
        }
    }

    pub fn score(&self, attentiveness: &Attentiveness) -> Result<SessionScore> {
        Ok(score_session(&self.sequence, &self.record(), attentiveness)?)
    }
}

/// Everything derived from an experiment's log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentState {
    pub config: ExperimentConfig,
    pub pool: Vec<StimulusItem>,
    /// Sessions in creation order.
    pub sessions: Vec<SessionState>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl ExperimentState {
    /// State after the first log entry, which must create the experiment.
    pub fn from_first(payload: &Payload) -> Result<Self> {
        match payload {
            Payload::ExperimentCreated { config, pool } => Ok(Self {
                config: config.clone(),
                pool: pool.clone(),
                sessions: Vec::new(),
                index: HashMap::new(),
            }),
            _ => Err(ServerError::CorruptLog("log does not start with experiment creation".into())),
        }
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .sessions
            .iter()
            .enumerate()
            .map(|(i, s)| (s.session_id.clone(), i))
            .collect();
    }

    pub fn session(&self, id: &str) -> Option<&SessionState> {
        self.index.get(id).map(|&i| &self.sessions[i])
    }

    /// Applies one recorded change. Live requests are validated before they
    /// are logged, so a failure here means the log is inconsistent.
    pub fn apply(&mut self, payload: &Payload) -> Result<()> {
        let corrupt = |m: String| Err(ServerError::CorruptLog(m));
        match payload {
            Payload::ExperimentCreated { .. } => corrupt("experiment created twice".into()),
            Payload::SessionCreated {
                session_id,
                participant_id,
                sequence,
            } => {
                if self.index.contains_key(session_id) {
                    return corrupt(format!("session {session_id} created twice"));
                }
                self.index.insert(session_id.clone(), self.sessions.len());
                self.sessions.push(SessionState {
                    session_id: session_id.clone(),
                    participant_id: participant_id.clone(),
                    sequence: sequence.clone(),
                    responses: BTreeMap::new(),
                    score: None,
                });
                Ok(())
            }
            Payload::ResponseRecorded { event } => {
                let Some(&i) = self.index.get(&event.session_id) else {
                    return corrupt(format!("response for unknown session {}", event.session_id));
                };
                let s = &mut self.sessions[i];
                if s.score.is_some() || event.slot_index >= s.sequence.len() {
                    return corrupt(format!("invalid response for session {}", event.session_id));
                }
                if s.responses.insert(event.slot_index, event.clone()).is_some() {
                    return corrupt(format!(
                        "second response for slot {} of session {}",
                        event.slot_index, event.session_id
                    ));
                }
                Ok(())
            }
            Payload::SessionCompleted { score } => {
                let Some(&i) = self.index.get(&score.session_id) else {
                    return corrupt(format!("completion of unknown session {}", score.session_id));
                };
                let s = &mut self.sessions[i];
                if s.score.is_some() {
                    return corrupt(format!("session {} completed twice", score.session_id));
                }
                s.score = Some(score.clone());
                Ok(())
            }
        }
    }
}
