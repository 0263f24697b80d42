use std::collections::{BTreeMap, BTreeSet};

use super::types::{Attentiveness, MemorabilityTable, Role, SessionRecord, SessionScore, TableRow, TrialSequence};
use crate::error::{Error, Result};
use crate::stats::ResponseMatrix;

/// Scores one playthrough.
///
/// A target is hit when a press is recorded at its repeat slot. False alarms
/// are presses on non-repeat slots (first showings of targets included) over
/// the number of such slots. A sequence without vigilance repeats has a
/// vigilance hit rate of 1.
pub fn score_session(
    seq: &TrialSequence,
    rec: &SessionRecord,
    attentiveness: &Attentiveness,
) -> Result<SessionScore> {
    if rec.sequence_id != seq.sequence_id {
        return Err(Error::InvalidInput(format!(
            "session {} refers to sequence {}, got {}",
            rec.session_id, rec.sequence_id, seq.sequence_id
        )));
    }
    let mut pressed = vec![false; seq.len()];
    let mut seen = BTreeSet::new();
    for e in &rec.events {
        if e.slot_index >= seq.len() {
            return Err(Error::InvalidInput(format!(
                "session {}: slot {} outside sequence of length {}",
                rec.session_id,
                e.slot_index,
                seq.len()
            )));
        }
        if !seen.insert(e.slot_index) {
            return Err(Error::InvalidInput(format!(
                "session {}: more than one event for slot {}",
                rec.session_id, e.slot_index
            )));
        }
        pressed[e.slot_index] = e.pressed;
    }

    let mut target_hits = BTreeMap::new();
    let (mut fa, mut non_repeat) = (0usize, 0usize);
    let (mut vig_hits, mut vig_slots) = (0usize, 0usize);
    for (p, &down) in seq.presentations.iter().zip(&pressed) {
        match (p.role, p.is_repeat) {
            (Role::Target, true) => {
                target_hits.insert(p.item_id.clone(), down);
            }
            (Role::VigilanceFiller, true) => {
                vig_slots += 1;
                vig_hits += usize::from(down);
            }
            (_, false) => {
                non_repeat += 1;
                fa += usize::from(down);
            }
            (Role::Filler, true) => {
                return Err(Error::InvalidInput(format!(
                    "plain filler {} marked as a repeat",
                    p.item_id
                )))
            }
        }
    }
    let false_alarm_rate = if non_repeat == 0 { 0.0 } else { fa as f64 / non_repeat as f64 };
    let vigilance_hit_rate = if vig_slots == 0 { 1.0 } else { vig_hits as f64 / vig_slots as f64 };
    Ok(SessionScore {
        session_id: rec.session_id.clone(),
        participant_id: rec.participant_id.clone(),
        sequence_id: seq.sequence_id.clone(),
        target_hits,
        false_alarm_rate,
        vigilance_hit_rate,
        attentive: vigilance_hit_rate >= attentiveness.min_vigilance_hit_rate
            && false_alarm_rate <= attentiveness.max_false_alarm_rate,
    })
}

/// Builds the memorability table and hit matrix from scored sessions,
/// dropping inattentive sessions. Rows of the matrix are attentive sessions
/// ordered by (participant id, session id); targets are sorted by id.
pub fn aggregate_scored(scores: &[SessionScore]) -> Result<(MemorabilityTable, ResponseMatrix)> {
    let mut kept: Vec<&SessionScore> = scores.iter().filter(|s| s.attentive).collect();
    if kept.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    kept.sort_by(|a, b| {
        (&a.participant_id, &a.session_id).cmp(&(&b.participant_id, &b.session_id))
    });

    let targets: BTreeSet<&str> = kept
        .iter()
        .flat_map(|s| s.target_hits.keys().map(String::as_str))
        .collect();
    let target_ids: Vec<String> = targets.iter().map(|t| t.to_string()).collect();

    let rows = target_ids
        .iter()
        .filter_map(|t| {
            let observers: Vec<(&SessionScore, bool)> = kept
                .iter()
                .filter_map(|s| s.target_hits.get(t).map(|&h| (*s, h)))
                .collect();
            if observers.is_empty() {
                return None;
            }
            let n = observers.len();
            let hits = observers.iter().filter(|(_, h)| *h).count();
            let score = hits as f64 / n as f64;
            let fa = observers.iter().map(|(s, _)| s.false_alarm_rate).sum::<f64>() / n as f64;
            Some(TableRow {
                item_id: t.clone(),
                score,
                hits,
                n_observers: n,
                variance: score * (1.0 - score),
                false_alarms: fa,
            })
        })
        .collect();

    let participant_ids = kept.iter().map(|s| s.participant_id.clone()).collect();
    let cells = kept
        .iter()
        .flat_map(|s| target_ids.iter().map(|t| s.target_hits.get(t).copied()))
        .collect();
    let matrix = ResponseMatrix::new(participant_ids, target_ids, cells)?;
    Ok((MemorabilityTable { rows }, matrix))
}

/// Scores and aggregates `(sequence, session)` pairs.
pub fn aggregate_scores<'a, I>(
    sessions: I,
    attentiveness: &Attentiveness,
) -> Result<(MemorabilityTable, ResponseMatrix)>
where
    I: IntoIterator<Item = (&'a TrialSequence, &'a SessionRecord)>,
{
    let scores = sessions
        .into_iter()
        .map(|(seq, rec)| score_session(seq, rec, attentiveness))
        .collect::<Result<Vec<_>>>()?;
    if scores.is_empty() {
        return Err(Error::InvalidInput("no sessions to aggregate".into()));
    }
    aggregate_scored(&scores)
}
