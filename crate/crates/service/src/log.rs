//! Append-only JSONL event logs, one file per session or experiment.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wrapped_haptics::psychophysics::{Method, Shown, TrialResponse};
use wrapped_haptics::teaching::{FeedbackFrame, FeedbackMode, Metrics};

use crate::error::{Result, ServiceError};

/// Phase of a teaching session. Only ever moves forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Idle,
    Demo1,
    Demo2,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Pair,
    Triplet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    SessionCreated {
        task: String,
        feedback: FeedbackMode,
        seed: u64,
    },
    Status {
        status: SessionStatus,
    },
    DemoSample {
        demo: u8,
        t: f64,
        x: f64,
        y: f64,
        theta: f64,
    },
    Frame {
        frame: FeedbackFrame,
    },
    ExperimentCreated {
        kind: ExperimentKind,
        seed: u64,
        method: Option<Method>,
    },
    /// A trial was put on the display; answers are timed from `ready_at`.
    Trial {
        trial_id: String,
        index: usize,
        shown: Shown,
        ready_at: f64,
    },
    Response {
        response: TrialResponse,
        server_rt: f64,
        flagged: bool,
    },
    Metric {
        metrics: Metrics,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope {
    pub seq: u64,
    /// Server wall time, s since the Unix epoch.
    pub time: f64,
    /// Client token of the request that produced the event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    pub payload: Payload,
}

/// Parse a JSONL log, checking that sequence numbers strictly increase.
pub fn read_envelopes<R: BufRead>(input: R) -> Result<Vec<EventEnvelope>> {
    let mut out: Vec<EventEnvelope> = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: EventEnvelope = serde_json::from_str(&line)?;
        if let Some(prev) = out.last() {
            if e.seq <= prev.seq {
                return Err(ServiceError::Invalid(format!("sequence {} follows {}", e.seq, prev.seq)));
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// Single writer for one log file.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl EventLog {
    /// Create a new log; fails if the file exists.
    pub fn create(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().append(true).create_new(true).open(path)?;
        Ok(EventLog { path: path.to_path_buf(), file, next_seq: 0 })
    }

    /// Reopen an existing log for appending, returning its events.
    pub fn open(path: &Path) -> Result<(Self, Vec<EventEnvelope>)> {
        let events = read_envelopes(BufReader::new(File::open(path)?))?;
        let file = OpenOptions::new().append(true).open(path)?;
        let next_seq = events.last().map_or(0, |e| e.seq + 1);
        Ok((EventLog { path: path.to_path_buf(), file, next_seq }, events))
    }

    pub fn append(&mut self, time: f64, token: Option<&str>, payload: Payload) -> Result<EventEnvelope> {
        let envelope = EventEnvelope { seq: self.next_seq, time, token: token.map(str::to_owned), payload };
        let mut line = serde_json::to_vec(&envelope)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        self.next_seq += 1;
        Ok(envelope)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read_all(&self) -> Result<Vec<EventEnvelope>> {
        read_envelopes(BufReader::new(File::open(&self.path)?))
    }
}
