//! Append-only JSON-lines run store. Every intermediate result (generation,
//! simulation verdict, similarity score) is persisted before use, keyed by
//! (case, experiment, sample, stage), so a killed run resumes at the first
//! missing work unit and the final report is a pure function of the log.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gateway::GenerationRecord;
use crate::sim::FunctionalityResult;
use crate::similarity::SimilarityScore;
use crate::Experiment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    Generated {
        record: GenerationRecord,
    },
    Simulated {
        result: FunctionalityResult,
    },
    Scored {
        score: SimilarityScore,
    },
    Unscorable {
        case_id: String,
        experiment: Experiment,
        sample_index: u32,
        reason: String,
    },
    /// Pairwise response-vs-response score (fluency pairwise variant only).
    PairScored {
        case_id: String,
        experiment: Experiment,
        a: u32,
        b: u32,
        value: f64,
    },
    Note {
        text: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("run store {path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("run store {path} line {line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

pub struct RunStore {
    path: PathBuf,
    file: std::fs::File,
}

impl RunStore {
    pub fn open(path: &Path) -> Result<RunStore, StoreError> {
        // A killed writer can leave a torn final line; appending after the
        // fragment would corrupt the next event, so truncate back to the
        // last complete line first.
        if let Ok(bytes) = std::fs::read(path) {
            if !bytes.is_empty() && !bytes.ends_with(b"\n") {
                let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
                std::fs::OpenOptions::new()
                    .write(true)
                    .open(path)
                    .and_then(|f| f.set_len(keep as u64))
                    .map_err(|e| StoreError::Io {
                        path: path.to_path_buf(),
                        msg: e.to_string(),
                    })?;
            }
        }
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| StoreError::Io {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })?;
        Ok(RunStore {
            path: path.to_path_buf(),
            file,
        })
    }

    /// One line per event, flushed immediately: a crash leaves at worst one
    /// torn final line, which load() tolerates.
    pub fn append(&mut self, event: &RunEvent) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| StoreError::Io {
                path: self.path.clone(),
                msg: e.to_string(),
            })
    }

    pub fn load(path: &Path) -> Result<Vec<RunEvent>, StoreError> {
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = std::fs::read_to_string(path).map_err(|e| StoreError::Io {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let lines: Vec<&str> = text.split('\n').collect();
        let mut events = Vec::new();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<RunEvent>(line) {
                Ok(ev) => events.push(ev),
                Err(e) => {
                    if i + 1 == lines.len() {
                        continue; // torn tail from a killed writer
                    }
                    return Err(StoreError::Malformed {
                        path: path.to_path_buf(),
                        line: i + 1,
                        msg: e.to_string(),
                    });
                }
            }
        }
        Ok(events)
    }
}

pub type UnitKey = (String, Experiment, u32);

#[derive(Clone, Debug, PartialEq)]
pub enum ScoreEntry {
    Value(SimilarityScore),
    Unscorable { reason: String },
}

/// Keyed view of the log with first-wins deduplication: a resumed run may
/// re-append a unit it raced to finish, and the first recorded result stays
/// authoritative.
#[derive(Default)]
pub struct StoreView {
    pub generated: BTreeMap<UnitKey, GenerationRecord>,
    pub simulated: BTreeMap<UnitKey, FunctionalityResult>,
    pub scored: BTreeMap<UnitKey, ScoreEntry>,
    pub pair_scores: BTreeMap<(String, Experiment, u32, u32), f64>,
    pub notes: Vec<String>,
}

pub fn view(events: Vec<RunEvent>) -> StoreView {
    let mut v = StoreView::default();
    for ev in events {
        match ev {
            RunEvent::Generated { record } => {
                let key = (record.case_id.clone(), record.experiment, record.sample_index);
                v.generated.entry(key).or_insert(record);
            }
            RunEvent::Simulated { result } => {
                let key = (result.case_id.clone(), result.experiment, result.sample_index);
                v.simulated.entry(key).or_insert(result);
            }
            RunEvent::Scored { score } => {
                let key = (score.case_id.clone(), score.experiment, score.sample_index);
                v.scored.entry(key).or_insert(ScoreEntry::Value(score));
            }
            RunEvent::Unscorable {
                case_id,
                experiment,
                sample_index,
                reason,
            } => {
                v.scored
                    .entry((case_id, experiment, sample_index))
                    .or_insert(ScoreEntry::Unscorable { reason });
            }
            RunEvent::PairScored {
                case_id,
                experiment,
                a,
                b,
                value,
            } => {
                v.pair_scores.entry((case_id, experiment, a, b)).or_insert(value);
            }
            RunEvent::Note { text } => v.notes.push(text),
        }
    }
    v
}
