use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use memorability::formats::{read_pool, write_matrix, write_table};
use memorability::game::{
    aggregate_scored, generate_sequence, Attentiveness, OrderMode, ResponseEvent, SequenceParams, SessionScore, StimulusItem, TableRow,
};
use memorability::rng::{derive_seed, str_salt};
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, SystemClock};
use crate::error::{Result, ServerError};
use crate::log::{EventLog, EventLogEntry};
use crate::state::{ExperimentConfig, ExperimentState, Payload, SessionState};

const LOG_FILE: &str = "events.jsonl";
const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone)]
pub struct StoreOptions {
    /// Write a snapshot after this many new log entries (0 disables snapshots).
    pub snapshot_every: usize,
    /// `fsync` every appended entry.
    pub fsync: bool,
    /// Base for relative pool manifest paths.
    pub pool_root: PathBuf,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            snapshot_every: 256,
            fsync: true,
            pool_root: PathBuf::from("."),
        }
    }
}

/// Body of `POST /experiments`. The pool comes either inline or from a
/// manifest CSV (`item_id,image_uri,role`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateExperiment {
    pub experiment_id: String,
    #[serde(default)]
    pub pool_manifest: Option<String>,
    #[serde(default)]
    pub pool: Option<Vec<StimulusItem>>,
    #[serde(default)]
    pub params: SequenceParams,
    #[serde(default)]
    pub attentiveness: Attentiveness,
    pub max_sessions: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment_id: String,
    pub n_slots: usize,
    pub max_sessions: usize,
    pub n_sessions: usize,
    pub n_completed: usize,
}

/// One slot as shown to the client; roles and repeat flags are withheld.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotView {
    pub slot_index: usize,
    pub image_uri: String,
    pub display_ms: u32,
    pub gap_ms: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub session_id: String,
    pub experiment_id: String,
    pub participant_id: String,
    pub sequence_id: String,
    pub completed: bool,
    pub slots: Vec<SlotView>,
}

/// Body of `POST /sessions/{id}/responses`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseIn {
    pub slot_index: usize,
    #[serde(default = "default_pressed")]
    pub pressed: bool,
    /// Milliseconds from stimulus onset, measured by the client.
    pub latency_ms: u32,
}

fn default_pressed() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseAck {
    pub session_id: String,
    pub slot_index: usize,
    pub pressed: bool,
    /// For a press: whether the slot was a repeat. `None` without a press.
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportPart {
    Table,
    Matrix,
}

/// Line records of the JSONL export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExportRecord {
    TableRow(TableRow),
    MatrixRow {
        participant_id: String,
        /// Per target: detected, missed, or not observed (`null`).
        hits: BTreeMap<String, Option<bool>>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    /// Offset of the last log entry reflected in `state`.
    offset: u64,
    state: ExperimentState,
}

struct Experiment {
    dir: PathBuf,
    state: ExperimentState,
    log: EventLog,
    since_snapshot: usize,
}

/// All experiments under one data directory, each with its own log.
pub struct Store {
    data_dir: PathBuf,
    opts: StoreOptions,
    clock: Arc<dyn Clock>,
    experiments: RwLock<BTreeMap<String, Arc<Mutex<Experiment>>>>,
    /// Session id to experiment id.
    sessions: RwLock<HashMap<String, String>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl Store {
    pub fn open(data_dir: impl Into<PathBuf>, opts: StoreOptions) -> Result<Self> {
        Self::open_with_clock(data_dir, opts, Arc::new(SystemClock))
    }

    /// Opens the store, recovering every experiment from its snapshot and log.
    pub fn open_with_clock(
        data_dir: impl Into<PathBuf>,
        opts: StoreOptions,
        clock: Arc<dyn Clock>,
    ) -> Result<Self> {
        let data_dir = data_dir.into();
        fs::create_dir_all(&data_dir)?;
        let mut experiments = BTreeMap::new();
        let mut sessions = HashMap::new();
        let mut dirs: Vec<PathBuf> = fs::read_dir(&data_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(LOG_FILE).is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let exp = load_experiment(&dir, opts.fsync)?;
            let id = exp.state.config.experiment_id.clone();
            for s in &exp.state.sessions {
                sessions.insert(s.session_id.clone(), id.clone());
            }
            experiments.insert(id, Arc::new(Mutex::new(exp)));
        }
        Ok(Self {
            data_dir,
            opts,
            clock,
            experiments: RwLock::new(experiments),
            sessions: RwLock::new(sessions),
        })
    }

    fn experiment(&self, id: &str) -> Result<Arc<Mutex<Experiment>>> {
        self.experiments
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServerError::NotFound(format!("experiment {id}")))
    }

    fn experiment_of_session(&self, session_id: &str) -> Result<Arc<Mutex<Experiment>>> {
        let exp_id = self
            .sessions
            .read()
            .unwrap()
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServerError::NotFound(format!("session {session_id}")))?;
        self.experiment(&exp_id)
    }

    fn commit(&self, exp: &mut Experiment, payload: Payload) -> Result<EventLogEntry> {
        let entry = exp.log.append(self.clock.now_ms(), payload)?;
        exp.state.apply(&entry.payload)?;
        exp.since_snapshot += 1;
        if self.opts.snapshot_every > 0 && exp.since_snapshot >= self.opts.snapshot_every {
            write_snapshot(exp, entry.offset)?;
        }
        Ok(entry)
    }

    pub fn create_experiment(&self, req: CreateExperiment) -> Result<ExperimentSummary> {
        if !valid_id(&req.experiment_id) {
            return Err(ServerError::InvalidInput(format!(
                "experiment id must be 1-64 characters of [A-Za-z0-9_-], got {:?}",
                req.experiment_id
            )));
        }
        if req.max_sessions == 0 {
            return Err(ServerError::InvalidInput("max_sessions must be positive".into()));
        }
        let pool = match (&req.pool, &req.pool_manifest) {
            (Some(pool), None) => pool.clone(),
            (None, Some(path)) => {
                let path = self.opts.pool_root.join(path);
                let file = File::open(&path).map_err(|e| {
                    ServerError::InvalidInput(format!("cannot open pool manifest {}: {e}", path.display()))
                })?;
                read_pool(BufReader::new(file))?
            }
            _ => {
                return Err(ServerError::InvalidInput(
                    "give exactly one of pool and pool_manifest".into(),
                ))
            }
        };
        // fail now rather than on the first session
        generate_sequence(&pool, &req.params, req.seed)?;

        let mut experiments = self.experiments.write().unwrap();
        if experiments.contains_key(&req.experiment_id) {
            return Err(ServerError::Conflict(format!(
                "experiment {} already exists",
                req.experiment_id
            )));
        }
        let dir = self.data_dir.join(&req.experiment_id);
        fs::create_dir_all(&dir)?;
        let (log, recovered) = EventLog::open(&dir.join(LOG_FILE), self.opts.fsync)?;
        if !recovered.entries.is_empty() {
            return Err(ServerError::Conflict(format!(
                "log for {} already exists",
                req.experiment_id
            )));
        }
        let config = ExperimentConfig {
            experiment_id: req.experiment_id.clone(),
            pool_manifest: req.pool_manifest.clone(),
            params: req.params.clone(),
            attentiveness: req.attentiveness,
            max_sessions: req.max_sessions,
            seed: req.seed,
        };
        let payload = Payload::ExperimentCreated { config, pool };
        let mut exp = Experiment {
            dir,
            state: ExperimentState::from_first(&payload)?,
            log,
            since_snapshot: 0,
        };
        exp.log.append(self.clock.now_ms(), payload)?;
        let summary = summary(&exp.state);
        experiments.insert(req.experiment_id, Arc::new(Mutex::new(exp)));
        Ok(summary)
    }

    pub fn experiment_summary(&self, experiment_id: &str) -> Result<ExperimentSummary> {
        let exp = self.experiment(experiment_id)?;
        let exp = exp.lock().unwrap();
        Ok(summary(&exp.state))
    }

    pub fn create_session(&self, experiment_id: &str, participant_id: &str) -> Result<SessionDescriptor> {
        if participant_id.is_empty() || participant_id.len() > 256 {
            return Err(ServerError::InvalidInput("participant_id must be 1-256 bytes".into()));
        }
        let exp = self.experiment(experiment_id)?;
        let mut exp = exp.lock().unwrap();
        let cfg = &exp.state.config;
        let index = exp.state.sessions.len();
        if index >= cfg.max_sessions {
            return Err(ServerError::Conflict(format!(
                "experiment {experiment_id} is full ({} sessions)",
                cfg.max_sessions
            )));
        }
        let base = derive_seed(cfg.seed, str_salt(&cfg.experiment_id));
        let seed = match cfg.params.order_mode {
            OrderMode::Randomized => derive_seed(base, index as u64),
            OrderMode::FixedOrder(_) => cfg.seed,
        };
        let sequence = generate_sequence(&exp.state.pool, &cfg.params, seed)?;
        let tag = derive_seed(base, u64::MAX - index as u64) as u32;
        let session_id = format!("{experiment_id}-{index:05}-{tag:08x}");
        self.commit(
            &mut exp,
            Payload::SessionCreated {
                session_id: session_id.clone(),
                participant_id: participant_id.to_string(),
                sequence,
            },
        )?;
        self.sessions
            .write()
            .unwrap()
            .insert(session_id.clone(), experiment_id.to_string());
        Ok(descriptor(&exp.state, exp.state.session(&session_id).unwrap()))
    }

    pub fn schedule(&self, session_id: &str) -> Result<SessionDescriptor> {
        let exp = self.experiment_of_session(session_id)?;
        let exp = exp.lock().unwrap();
        Ok(descriptor(&exp.state, exp.state.session(session_id).unwrap()))
    }

    /// Records a response at most once per (session, slot); a repeated
    /// request gets the acknowledgment of the first.
    pub fn record_response(&self, session_id: &str, resp: ResponseIn) -> Result<ResponseAck> {
        let exp = self.experiment_of_session(session_id)?;
        let mut exp = exp.lock().unwrap();
        let s = exp.state.session(session_id).unwrap();
        if s.score.is_some() {
            return Err(ServerError::Gone(format!("session {session_id} is complete")));
        }
        let Some(slot) = s.sequence.presentations.get(resp.slot_index) else {
            return Err(ServerError::InvalidInput(format!(
                "slot {} outside session of {} slots",
                resp.slot_index,
                s.sequence.len()
            )));
        };
        let is_repeat = slot.is_repeat;
        if let Some(prev) = s.responses.get(&resp.slot_index) {
            return Ok(ack(prev, is_repeat));
        }
        let event = ResponseEvent {
            session_id: session_id.to_string(),
            slot_index: resp.slot_index,
            pressed: resp.pressed,
            latency_ms: resp.latency_ms,
        };
        let out = ack(&event, is_repeat);
        self.commit(&mut exp, Payload::ResponseRecorded { event })?;
        Ok(out)
    }

    /// Scores and closes a session; completing again returns the stored score.
    pub fn complete_session(&self, session_id: &str) -> Result<SessionScore> {
        let exp = self.experiment_of_session(session_id)?;
        let mut exp = exp.lock().unwrap();
        let s = exp.state.session(session_id).unwrap();
        if let Some(score) = &s.score {
            return Ok(score.clone());
        }
        let score = s.score(&exp.state.config.attentiveness)?;
        self.commit(&mut exp, Payload::SessionCompleted { score: score.clone() })?;
        Ok(score)
    }

    /// Aggregated scores over attentive completed sessions. `part` selects the
    /// CSV file; JSONL without a part holds table rows then matrix rows.
    pub fn export(&self, experiment_id: &str, format: ExportFormat, part: Option<ExportPart>) -> Result<Vec<u8>> {
        let exp = self.experiment(experiment_id)?;
        let scores: Vec<SessionScore> = {
            let exp = exp.lock().unwrap();
            exp.state.sessions.iter().filter_map(|s| s.score.clone()).collect()
        };
        if scores.is_empty() {
            return Err(ServerError::EmptyAggregate);
        }
        let (table, matrix) = aggregate_scored(&scores)?;
        let mut out = Vec::new();
        match format {
            ExportFormat::Csv => match part.unwrap_or(ExportPart::Table) {
                ExportPart::Table => write_table(&mut out, &table)?,
                ExportPart::Matrix => write_matrix(&mut out, &matrix)?,
            },
            ExportFormat::Jsonl => {
                let mut records = Vec::new();
                if part != Some(ExportPart::Matrix) {
                    records.extend(table.rows.into_iter().map(ExportRecord::TableRow));
                }
                if part != Some(ExportPart::Table) {
                    for (i, pid) in matrix.participant_ids().iter().enumerate() {
                        records.push(ExportRecord::MatrixRow {
                            participant_id: pid.clone(),
                            hits: matrix.target_ids().iter().cloned().zip(matrix.row(i).iter().copied()).collect(),
                        });
                    }
                }
                for r in records {
                    serde_json::to_writer(&mut out, &r).map_err(std::io::Error::other)?;
                    out.push(b'\n');
                }
            }
        }
        Ok(out)
    }

    /// Writes a snapshot of one experiment now.
    pub fn snapshot(&self, experiment_id: &str) -> Result<()> {
        let exp = self.experiment(experiment_id)?;
        let mut exp = exp.lock().unwrap();
        let last = exp.log.next_offset() - 1;
        write_snapshot(&mut exp, last)
    }

    pub fn experiment_ids(&self) -> Vec<String> {
        self.experiments.read().unwrap().keys().cloned().collect()
    }

    pub fn log_path(&self, experiment_id: &str) -> PathBuf {
        self.data_dir.join(experiment_id).join(LOG_FILE)
    }
}

fn summary(state: &ExperimentState) -> ExperimentSummary {
    ExperimentSummary {
        experiment_id: state.config.experiment_id.clone(),
        n_slots: state.config.params.total_slots(),
        max_sessions: state.config.max_sessions,
        n_sessions: state.sessions.len(),
        n_completed: state.sessions.iter().filter(|s| s.score.is_some()).count(),
    }
}

fn descriptor(state: &ExperimentState, s: &SessionState) -> SessionDescriptor {
    let params = &s.sequence.params;
    SessionDescriptor {
        session_id: s.session_id.clone(),
        experiment_id: state.config.experiment_id.clone(),
        participant_id: s.participant_id.clone(),
        sequence_id: s.sequence.sequence_id.clone(),
        completed: s.score.is_some(),
        slots: s
            .sequence
            .presentations
            .iter()
            .map(|p| SlotView {
                slot_index: p.slot_index,
                image_uri: p.image_uri.clone(),
                display_ms: params.display_ms,
                gap_ms: params.gap_ms,
            })
            .collect(),
    }
}

fn ack(event: &ResponseEvent, is_repeat: bool) -> ResponseAck {
    ResponseAck {
        session_id: event.session_id.clone(),
        slot_index: event.slot_index,
        pressed: event.pressed,
        correct: event.pressed.then_some(is_repeat),
    }
}

fn write_snapshot(exp: &mut Experiment, offset: u64) -> Result<()> {
    let snap = Snapshot {
        offset,
        state: exp.state.clone(),
    };
    let tmp = exp.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
    let bytes = serde_json::to_vec(&snap).map_err(std::io::Error::other)?;
    fs::write(&tmp, bytes)?;
    File::open(&tmp)?.sync_all()?;
    fs::rename(&tmp, exp.dir.join(SNAPSHOT_FILE))?;
    exp.since_snapshot = 0;
    Ok(())
}

fn load_experiment(dir: &Path, fsync: bool) -> Result<Experiment> {
    let (log, recovered) = EventLog::open(&dir.join(LOG_FILE), fsync)?;
    let entries = recovered.entries;
    let Some(first) = entries.first() else {
        return Err(ServerError::CorruptLog(format!("{}: empty log", dir.display())));
    };

    let snap_path = dir.join(SNAPSHOT_FILE);
    let snapshot: Option<Snapshot> = match fs::read(&snap_path) {
        Ok(bytes) => serde_json::from_slice(&bytes).ok(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    // a snapshot ahead of the log cannot be trusted; fall back to full replay
    let snapshot = snapshot.filter(|s| s.offset < entries.len() as u64);

    let (mut state, start) = match snapshot {
        Some(s) => {
            let mut state = s.state;
            state.rebuild_index();
            (state, s.offset as usize + 1)
        }
        None => (ExperimentState::from_first(&first.payload)?, 1),
    };
    for entry in &entries[start..] {
        state.apply(&entry.payload)?;
    }
    Ok(Experiment {
        dir: dir.to_path_buf(),
        state,
        log,
        since_snapshot: entries.len() - start,
    })
}

/// Rebuilds the state of the experiment stored in `dir` by replaying its
/// whole log, ignoring any snapshot.
pub fn replay_log(dir: &Path) -> Result<ExperimentState> {
    let (_, recovered) = EventLog::open(&dir.join(LOG_FILE), false)?;
    let mut entries = recovered.entries.iter();
    let first = entries
        .next()
        .ok_or_else(|| ServerError::CorruptLog(format!("{}: empty log", dir.display())))?;
    let mut state = ExperimentState::from_first(&first.payload)?;
    for e in entries {
        state.apply(&e.payload)?;
    }
    Ok(state)
}
