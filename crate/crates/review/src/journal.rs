use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use forgescore_core::labels::ReviewStatus;
use forgescore_core::ForgeryLabel;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::ReviewError;

/// Wire form: `"accept"`, `"reject"` or `{"reassign": <class code>}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reassign(ForgeryLabel),
    Reject,
}

impl Verdict {
    pub fn status(self) -> ReviewStatus {
        match self {
            Self::Accept => ReviewStatus::Accepted,
            Self::Reassign(l) => ReviewStatus::Reassigned(l),
            Self::Reject => ReviewStatus::Rejected,
        }
    }

    /// Reassignment targets another anomaly class; dismissing a fake is a rejection.
    pub fn validate(self) -> Result<Self, ReviewError> {
        match self {
            Self::Reassign(ForgeryLabel::Real) => {
                Err(ReviewError::InvalidVerdict("reassign target must be an anomaly class (0, 1 or 2)".into()))
            }
            v => Ok(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewEvent {
    pub seq: u64,
    pub timestamp: String,
    pub video_id: String,
    pub verdict: Verdict,
    pub reviewer: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReviewError + '_ {
    move |source| ReviewError::Io { path: path.to_path_buf(), source }
}

/// Reads every event, checking that `seq` strictly increases. A final line
/// without a trailing newline that does not parse is treated as a torn
/// write and dropped.
pub fn read_journal(path: &Path) -> Result<Vec<ReviewEvent>, ReviewError> {
    Ok(read_events(path)?.0)
}

/// Events plus whether a torn final line was dropped.
fn read_events(path: &Path) -> Result<(Vec<ReviewEvent>, bool), ReviewError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), false)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut events: Vec<ReviewEvent> = Vec::new();
    let mut line = String::new();
    let mut number = 0;
    let mut torn = false;
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(io_err(path))? == 0 {
            break;
        }
        number += 1;
        let complete = line.ends_with('\n');
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let ev: ReviewEvent = match serde_json::from_str(text) {
            Ok(ev) => ev,
            Err(e) if !complete => {
                warn!("{}: dropping torn final line {number}: {e}", path.display());
                torn = true;
                break;
            }
            Err(e) => {
                return Err(ReviewError::CorruptJournal {
                    path: path.to_path_buf(),
                    line: number,
                    message: e.to_string(),
                })
            }
        };
        if let Some(prev) = events.last() {
            if ev.seq <= prev.seq {
                return Err(ReviewError::CorruptJournal {
                    path: path.to_path_buf(),
                    line: number,
                    message: format!("seq {} does not follow {}", ev.seq, prev.seq),
                });
            }
        }
        events.push(ev);
    }
    Ok((events, torn))
}

/// Append-only writer. Each event is written as one line and synced to disk
/// before [`append`](Self::append) returns.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
    last_seq: u64,
}

impl Journal {
    /// Opens (creating if needed) the journal and returns the events already
    /// in it. A torn final line is cut off before new events are appended.
    pub fn open(path: &Path) -> Result<(Self, Vec<ReviewEvent>), ReviewError> {
        let (events, torn) = read_events(path)?;
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        if torn {
            let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64).map_err(io_err(path))?;
            file.sync_data().map_err(io_err(path))?;
        } else if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            file.write_all(b"\n").map_err(io_err(path))?;
        }
        let last_seq = events.last().map_or(0, |e| e.seq);
        Ok((Self { path: path.to_path_buf(), file, last_seq }, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn append(
        &mut self,
        video_id: &str,
        verdict: Verdict,
        reviewer: &str,
        timestamp: String,
    ) -> Result<ReviewEvent, ReviewError> {
        let ev = ReviewEvent {
            seq: self.last_seq + 1,
            timestamp,
            video_id: video_id.to_string(),
            verdict,
            reviewer: reviewer.to_string(),
        };
        let mut line = serde_json::to_string(&ev).expect("event serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))?;
        self.last_seq = ev.seq;
        Ok(ev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_wire_format() {
        assert_eq!(serde_json::to_string(&Verdict::Accept).unwrap(), "\"accept\"");
        assert_eq!(serde_json::to_string(&Verdict::Reassign(ForgeryLabel::Motion)).unwrap(), "{\"reassign\":2}");
        assert_eq!(serde_json::from_str::<Verdict>("\"reject\"").unwrap(), Verdict::Reject);
        assert!(serde_json::from_str::<Verdict>("\"maybe\"").is_err());
        assert!(Verdict::Reassign(ForgeryLabel::Real).validate().is_err());
    }

    #[test]
    fn append_then_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (mut j, events) = Journal::open(&path).unwrap();
        assert!(events.is_empty());
        j.append("v1", Verdict::Accept, "ann", "t0".into()).unwrap();
        j.append("v2", Verdict::Reject, "ann", "t1".into()).unwrap();
        drop(j);
        let (j, events) = Journal::open(&path).unwrap();
        assert_eq!(j.last_seq(), 2);
        assert_eq!(events.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn torn_tail_is_dropped_and_bad_seq_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let good = r#"{"seq":1,"timestamp":"t","video_id":"v1","verdict":"accept","reviewer":"a"}"#;
        std::fs::write(&path, format!("{good}\n{{\"seq\":2,\"vid")).unwrap();
        let (mut j, events) = Journal::open(&path).unwrap();
        assert_eq!(events.len(), 1);
        j.append("v2", Verdict::Accept, "a", "t".into()).unwrap();
        assert_eq!(read_journal(&path).unwrap().len(), 2);

        std::fs::write(&path, format!("{good}\n{good}\n")).unwrap();
        assert!(matches!(read_journal(&path), Err(ReviewError::CorruptJournal { line: 2, .. })));
    }
}
