//! Line-delimited JSON records, one object per line, tagged by `type`:
//!
//! - `presentation`: one slot of a sequence, carrying the sequence's seed and
//!   parameters so a sequence file needs no header line;
//! - `session`: a playthrough of a sequence by a participant;
//! - `response`: one response event of an earlier session.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    OrderMode, Presentation, ResponseEvent, Role, SequenceParams, SessionRecord, Spacing,
    TrialSequence,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresentationRecord {
    pub sequence_id: String,
    pub seed: u64,
    pub slot_index: usize,
    pub item_id: String,
    pub image_uri: String,
    pub role: Role,
    pub is_repeat: bool,
    pub display_ms: u32,
    pub gap_ms: u32,
    pub n_targets: usize,
    pub n_fillers: usize,
    pub n_vigilance: usize,
    pub target_spacing: Spacing,
    pub vigilance_spacing: Spacing,
    pub order_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub participant_id: String,
    pub sequence_id: String,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Presentation(PresentationRecord),
    Session(SessionHeader),
    Response(ResponseEvent),
}

/// Sequences and sessions in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordSet {
    pub sequences: Vec<TrialSequence>,
    pub sessions: Vec<SessionRecord>,
}

impl RecordSet {
    pub fn sequence(&self, id: &str) -> Option<&TrialSequence> {
        self.sequences.iter().find(|s| s.sequence_id == id)
    }

    /// Every session with its sequence.
    pub fn pairs(&self) -> Result<Vec<(&TrialSequence, &SessionRecord)>> {
        let index: HashMap<&str, &TrialSequence> =
            self.sequences.iter().map(|s| (s.sequence_id.as_str(), s)).collect();
        self.sessions
            .iter()
            .map(|rec| {
                index
                    .get(rec.sequence_id.as_str())
                    .map(|s| (*s, rec))
                    .ok_or_else(|| {
                        Error::Format(format!(
                            "session {} refers to unknown sequence {}",
                            rec.session_id, rec.sequence_id
                        ))
                    })
            })
            .collect()
    }

    pub fn to_records(&self) -> Vec<Record> {
        let mut out = Vec::new();
        for seq in &self.sequences {
            out.extend(sequence_records(seq));
        }
        for s in &self.sessions {
            out.push(Record::Session(SessionHeader {
                session_id: s.session_id.clone(),
                participant_id: s.participant_id.clone(),
                sequence_id: s.sequence_id.clone(),
                completed: s.completed,
            }));
            out.extend(s.events.iter().cloned().map(Record::Response));
        }
        out
    }
}

pub(crate) fn sequence_records(seq: &TrialSequence) -> impl Iterator<Item = Record> + '_ {
    let p = &seq.params;
    seq.presentations.iter().map(move |slot| {
        Record::Presentation(PresentationRecord {
            sequence_id: seq.sequence_id.clone(),
            seed: seq.seed,
            slot_index: slot.slot_index,
            item_id: slot.item_id.clone(),
            image_uri: slot.image_uri.clone(),
            role: slot.role,
            is_repeat: slot.is_repeat,
            display_ms: p.display_ms,
            gap_ms: p.gap_ms,
            n_targets: p.n_targets,
            n_fillers: p.n_fillers,
            n_vigilance: p.n_vigilance,
            target_spacing: p.target_spacing,
            vigilance_spacing: p.vigilance_spacing,
            order_id: p.order_mode.order_id(),
        })
    })
}

pub fn write_records<W: Write>(mut w: W, records: &[Record]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<RecordSet> {
    let mut set = RecordSet::default();
    let mut seq_index: HashMap<String, usize> = HashMap::new();
    let mut session_index: HashMap<String, usize> = HashMap::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {lineno}: {e}")))?;
        match rec {
            Record::Presentation(p) => {
                let i = *seq_index.entry(p.sequence_id.clone()).or_insert_with(|| {
                    set.sequences.push(TrialSequence {
                        sequence_id: p.sequence_id.clone(),
                        seed: p.seed,
                        presentations: Vec::new(),
                        params: SequenceParams {
                            n_targets: p.n_targets,
                            n_fillers: p.n_fillers,
                            n_vigilance: p.n_vigilance,
                            target_spacing: p.target_spacing,
                            vigilance_spacing: p.vigilance_spacing,
                            display_ms: p.display_ms,
                            gap_ms: p.gap_ms,
                            order_mode: p.order_id.map_or(OrderMode::Randomized, OrderMode::FixedOrder),
                        },
                    });
                    set.sequences.len() - 1
                });
                let seq = &mut set.sequences[i];
                if p.slot_index != seq.presentations.len() {
                    return Err(Error::Format(format!(
                        "line {lineno}: sequence {} expects slot {}, got {}",
                        p.sequence_id,
                        seq.presentations.len(),
                        p.slot_index
                    )));
                }
                seq.presentations.push(Presentation {
                    slot_index: p.slot_index,
                    item_id: p.item_id,
                    image_uri: p.image_uri,
                    role: p.role,
                    is_repeat: p.is_repeat,
                });
            }
            Record::Session(h) => {
                if session_index.contains_key(&h.session_id) {
                    return Err(Error::Format(format!(
                        "line {lineno}: duplicate session {}",
                        h.session_id
                    )));
                }
                session_index.insert(h.session_id.clone(), set.sessions.len());
                set.sessions.push(SessionRecord {
                    session_id: h.session_id,
                    participant_id: h.participant_id,
                    sequence_id: h.sequence_id,
                    events: Vec::new(),
                    completed: h.completed,
                });
            }
            Record::Response(e) => {
                let i = *session_index.get(&e.session_id).ok_or_else(|| {
                    Error::Format(format!(
                        "line {lineno}: response for unknown session {}",
                        e.session_id
                    ))
                })?;
                set.sessions[i].events.push(e);
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_sequence, StimulusItem};

    fn pool() -> Vec<StimulusItem> {
        (0..3)
            .map(|i| StimulusItem::new(format!("f{i}"), format!("img/f{i}.jpg"), Role::Filler))
            .collect()
    }

    fn params() -> SequenceParams {
        SequenceParams {
            n_targets: 0,
            n_fillers: 3,
            n_vigilance: 0,
            ..SequenceParams::default()
        }
    }

    #[test]
    fn one_line_per_presentation() {
        let seq = generate_sequence(&pool(), &params(), 4).unwrap();
        let set = RecordSet {
            sequences: vec![seq],
            sessions: vec![],
        };
        let mut buf = Vec::new();
        write_records(&mut buf, &set.to_records()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.starts_with("{\"type\":\"presentation\"")));
        assert_eq!(read_records(&buf[..]).unwrap(), set);
    }

    #[test]
    fn sessions_round_trip() {
        let seq = generate_sequence(&pool(), &params(), 4).unwrap();
        let set = RecordSet {
            sessions: vec![SessionRecord {
                session_id: "s1".into(),
                participant_id: "p1".into(),
                sequence_id: seq.sequence_id.clone(),
                events: vec![ResponseEvent {
                    session_id: "s1".into(),
                    slot_index: 1,
                    pressed: true,
                    latency_ms: 512,
                }],
                completed: true,
            }],
            sequences: vec![seq],
        };
        let mut buf = Vec::new();
        write_records(&mut buf, &set.to_records()).unwrap();
        let back = read_records(&buf[..]).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.pairs().unwrap().len(), 1);
    }

    #[test]
    fn rejects_orphans_and_gaps() {
        let orphan = r#"{"type":"response","session_id":"x","slot_index":0,"pressed":true,"latency_ms":1}"#;
        assert!(read_records(orphan.as_bytes()).is_err());
        let seq = generate_sequence(&pool(), &params(), 4).unwrap();
        let mut recs: Vec<Record> = sequence_records(&seq).collect();
        recs.remove(1);
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        assert!(matches!(read_records(&buf[..]), Err(Error::Format(_))));
        assert!(read_records("not json\n".as_bytes()).is_err());
    }
}
