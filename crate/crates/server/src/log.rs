//! Append-only event log: one JSON [`EventLogEntry`] per line.
//!
//! Entries are written with a single `write_all` of the line plus its newline,
//! so a crash can only leave an unterminated fragment at the end of the file.
//! Opening the log drops such a fragment; any malformed complete line is
//! reported as corruption.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServerError};
use crate::state::Payload;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogEntry {
    /// Position in the log, starting at 0 and increasing by one per entry.
    pub offset: u64,
    /// Server receive time, milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub payload: Payload,
}

#[derive(Debug)]
pub struct EventLog {
    file: File,
    next_offset: u64,
    fsync: bool,
}

/// Outcome of opening a log.
#[derive(Debug)]
pub struct Recovered {
    pub entries: Vec<EventLogEntry>,
    /// Bytes of an unterminated trailing fragment that were discarded.
    pub dropped_tail: usize,
}

impl EventLog {
    pub fn open(path: &Path, fsync: bool) -> Result<(Self, Recovered)> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;

        let complete = buf.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let dropped_tail = buf.len() - complete;
        if dropped_tail > 0 {
            file.set_len(complete as u64)?;
            file.seek(SeekFrom::End(0))?;
        }

        let mut entries = Vec::new();
        for (n, line) in buf[..complete].split(|&b| b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let entry: EventLogEntry = serde_json::from_slice(line)
                .map_err(|e| ServerError::CorruptLog(format!("{}: line {}: {e}", path.display(), n + 1)))?;
            if entry.offset != entries.len() as u64 {
                return Err(ServerError::CorruptLog(format!(
                    "{}: line {} has offset {}, expected {}",
                    path.display(),
                    n + 1,
                    entry.offset,
                    entries.len()
                )));
            }
            entries.push(entry);
        }
        let log = Self {
            file,
            next_offset: entries.len() as u64,
            fsync,
        };
        Ok((log, Recovered { entries, dropped_tail }))
    }

    pub fn next_offset(&self) -> u64 {
        self.next_offset
    }

    /// Persists `payload` as the next entry; the entry is durable (flushed,
    /// and synced when configured) when this returns.
    pub fn append(&mut self, timestamp_ms: u64, payload: Payload) -> Result<EventLogEntry> {
        let entry = EventLogEntry {
            offset: self.next_offset,
            timestamp_ms,
            payload,
        };
        let mut line = serde_json::to_vec(&entry).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        if self.fsync {
            self.file.sync_data()?;
        }
        self.next_offset += 1;
        Ok(entry)
    }
}
