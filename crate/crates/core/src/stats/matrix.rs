use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Participants × targets hit matrix. A cell is `Some(true)` for a detected
/// repeat, `Some(false)` for a miss and `None` when the participant never saw
/// that target's repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    participant_ids: Vec<String>,
    target_ids: Vec<String>,
    cells: Vec<Option<bool>>,
}

impl ResponseMatrix {
    /// Builds a matrix from row-major cells.
    pub fn new(
        participant_ids: Vec<String>,
        target_ids: Vec<String>,
        cells: Vec<Option<bool>>,
    ) -> Result<Self> {
        if cells.len() != participant_ids.len() * target_ids.len() {
            return Err(Error::InvalidInput(format!(
                "{} cells for a {}x{} matrix",
                cells.len(),
                participant_ids.len(),
                target_ids.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = target_ids.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate target id {dup}")));
        }
        Ok(Self {
            participant_ids,
            target_ids,
            cells,
        })
    }

    pub fn from_rows(
        participant_ids: Vec<String>,
        target_ids: Vec<String>,
        rows: Vec<Vec<Option<bool>>>,
    ) -> Result<Self> {
        if rows.iter().any(|r| r.len() != target_ids.len()) {
            return Err(Error::InvalidInput("ragged response rows".into()));
        }
        if rows.len() != participant_ids.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows for {} participants",
                rows.len(),
                participant_ids.len()
            )));
        }
        Self::new(participant_ids, target_ids, rows.into_iter().flatten().collect())
    }

    pub fn participant_ids(&self) -> &[String] {
        &self.participant_ids
    }

    pub fn target_ids(&self) -> &[String] {
        &self.target_ids
    }

    pub fn n_participants(&self) -> usize {
        self.participant_ids.len()
    }

    pub fn n_targets(&self) -> usize {
        self.target_ids.len()
    }

    pub fn row(&self, participant: usize) -> &[Option<bool>] {
        let t = self.target_ids.len();
        &self.cells[participant * t..(participant + 1) * t]
    }

    pub fn get(&self, participant: usize, target: usize) -> Option<bool> {
        self.row(participant)[target]
    }

    pub fn target_index(&self, id: &str) -> Option<usize> {
        self.target_ids.iter().position(|t| t == id)
    }

    /// Per-target hit rate over `members`, ignoring missing cells.
    /// `None` for targets no member observed.
    pub fn group_means(&self, members: &[usize]) -> Vec<Option<f64>> {
        let t = self.n_targets();
        let mut hits = vec![0u32; t];
        let mut seen = vec![0u32; t];
        for &p in members {
            for (j, cell) in self.row(p).iter().enumerate() {
                if let Some(h) = cell {
                    seen[j] += 1;
                    hits[j] += u32::from(*h);
                }
            }
        }
        hits.iter()
            .zip(&seen)
            .map(|(&h, &n)| (n > 0).then(|| f64::from(h) / f64::from(n)))
            .collect()
    }

    /// Hit rate over all participants.
    pub fn overall_means(&self) -> Vec<Option<f64>> {
        let all: Vec<usize> = (0..self.n_participants()).collect();
        self.group_means(&all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_means_skip_missing() {
        let m = ResponseMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec!["t0".into(), "t1".into()],
            vec![vec![Some(true), None], vec![Some(false), None]],
        )
        .unwrap();
        assert_eq!(m.group_means(&[0, 1]), vec![Some(0.5), None]);
        assert_eq!(m.group_means(&[0]), vec![Some(1.0), None]);
    }

    #[test]
    fn dimension_checks() {
        assert!(ResponseMatrix::new(vec!["a".into()], vec!["t".into()], vec![]).is_err());
        assert!(ResponseMatrix::new(vec![], vec!["t".into(), "t".into()], vec![]).is_err());
    }
}
