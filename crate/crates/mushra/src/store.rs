use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::experiment::Experiment;
use crate::service::{RatingRecord, SessionRecord};
use crate::{io_err, MushraError, Result};

pub const LOG_FILE: &str = "records.jsonl";

/// One line of the record log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Experiment(Experiment),
    Session(SessionRecord),
    Served { session_id: String, trial_index: usize },
    Rating(RatingRecord),
}

/// Append-only line-delimited log. Each event is written with a single
/// `write_all` of one complete line followed by `fsync`.
#[derive(Debug)]
pub struct RecordLog {
    path: PathBuf,
    file: File,
}

impl RecordLog {
    /// Opens (creating if needed) the log in `dir` and returns the events
    /// already stored. A torn final line from an interrupted write is
    /// dropped; a malformed line anywhere else is an error.
    pub fn open(dir: &Path) -> Result<(Self, Vec<Event>)> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(LOG_FILE);
        let mut events = Vec::new();
        let mut valid_len = 0;
        if path.exists() {
            let raw = std::fs::read(&path).map_err(io_err(&path))?;
            let text = String::from_utf8_lossy(&raw);
            let lines: Vec<&str> = text.split('\n').collect();
            // The segment after the final newline is empty unless the last
            // write was torn.
            for (i, line) in lines.iter().enumerate() {
                if i + 1 == lines.len() {
                    if !line.trim().is_empty() {
                        log::warn!("{}: dropping torn final record", path.display());
                    }
                    break;
                }
                if !line.trim().is_empty() {
                    let event = serde_json::from_str(line).map_err(|e| MushraError::Log { path: path.clone(), message: format!("line {}: {e}", i + 1) })?;
                    events.push(event);
                }
                valid_len += line.len() as u64 + 1;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        // Cut a torn tail so the next append starts on a fresh line.
        if file.metadata().map_err(io_err(&path))?.len() > valid_len {
            file.set_len(valid_len).map_err(io_err(&path))?;
        }
        Ok((Self { path, file }, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &Event) -> Result<()> {
        let mut line = serde_json::to_vec(event).map_err(|e| MushraError::Log { path: self.path.clone(), message: e.to_string() })?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn served(i: usize) -> Event {
        Event::Served { session_id: "s".into(), trial_index: i }
    }

    #[test]
    fn replays_in_order() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (mut log, events) = RecordLog::open(dir.path()).unwrap();
            assert!(events.is_empty());
            for i in 0..3 {
                log.append(&served(i)).unwrap();
            }
        }
        let (_, events) = RecordLog::open(dir.path()).unwrap();
        assert_eq!(events, vec![served(0), served(1), served(2)]);
    }

    #[test]
    fn torn_tail_is_dropped_and_truncated() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (mut log, _) = RecordLog::open(dir.path()).unwrap();
            log.append(&served(0)).unwrap();
        }
        let path = dir.path().join(LOG_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"event\":\"served\",\"sess").unwrap();
        drop(f);
        {
            let (mut log, events) = RecordLog::open(dir.path()).unwrap();
            assert_eq!(events, vec![served(0)]);
            log.append(&served(1)).unwrap();
        }
        let (_, events) = RecordLog::open(dir.path()).unwrap();
        assert_eq!(events, vec![served(0), served(1)]);
    }

    #[test]
    fn corruption_in_the_middle_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(LOG_FILE), "garbage\n{\"event\":\"served\",\"session_id\":\"s\",\"trial_index\":0}\n").unwrap();
        assert!(matches!(RecordLog::open(dir.path()), Err(MushraError::Log { .. })));
    }
}
