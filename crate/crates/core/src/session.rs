//! Session logs: NDJSON interleaving scan samples and control events, with
//! a header line carrying what a replay needs to reproduce the run.

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::ControlEvent;
use crate::room::Point;
use crate::scanlog::{parse_sample, write_sample, RssiSample};

pub const SESSION_MAGIC: &str = "beaconquiz";
pub const SESSION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionHeader {
    pub session: String,
    pub version: u32,
    pub seed: u64,
    pub tick_rate_hz: u32,
    pub shuffle_answers: bool,
    pub feedback_auto_advance_ms: u64,
}

impl SessionHeader {
    pub fn new(seed: u64, tick_rate_hz: u32, shuffle_answers: bool, feedback_auto_advance_ms: u64) -> Self {
        Self {
            session: SESSION_MAGIC.into(),
            version: SESSION_VERSION,
            seed,
            tick_rate_hz,
            shuffle_answers,
            feedback_auto_advance_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionEvent {
    pub ts_ms: u64,
    pub event: ControlEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEntry {
    Sample(RssiSample),
    Event(SessionEvent),
}

impl SessionEntry {
    pub fn ts_ms(&self) -> u64 {
        match self {
            SessionEntry::Sample(s) => s.ts_ms,
            SessionEntry::Event(e) => e.ts_ms,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    ts_ms: u64,
    event: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
}

impl From<&SessionEvent> for EventLine {
    fn from(e: &SessionEvent) -> Self {
        let (x, y) = match e.event {
            ControlEvent::Move(p) => (Some(p.x), Some(p.y)),
            _ => (None, None),
        };
        EventLine {
            ts_ms: e.ts_ms,
            event: e.event.name().into(),
            x,
            y,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl SessionError {
    pub fn line(&self) -> Option<usize> {
        match self {
            SessionError::Parse { line, .. } => Some(*line),
            SessionError::Io(_) => None,
        }
    }
}

/// Streaming writer used by the core loop.
pub struct SessionRecorder<W: Write> {
    sink: W,
}

impl SessionRecorder<BufWriter<File>> {
    pub fn create(path: &Path, header: &SessionHeader) -> io::Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> SessionRecorder<W> {
    pub fn new(mut sink: W, header: &SessionHeader) -> io::Result<Self> {
        serde_json::to_writer(&mut sink, header)?;
        sink.write_all(b"\n")?;
        Ok(Self { sink })
    }

    pub fn sample(&mut self, sample: &RssiSample) -> io::Result<()> {
        write_sample(&mut self.sink, sample)
    }

    pub fn event(&mut self, event: &SessionEvent) -> io::Result<()> {
        serde_json::to_writer(&mut self.sink, &EventLine::from(event))?;
        self.sink.write_all(b"\n")
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.sink.flush()
    }

    pub fn into_inner(mut self) -> io::Result<W> {
        self.sink.flush()?;
        Ok(self.sink)
    }
}

/// Writes a whole session at once. Entries are ordered by timestamp with
/// samples ahead of events that share a timestamp, which is the order the
/// core loop consumes them in.
pub fn record_session(
    header: &SessionHeader,
    samples: &[RssiSample],
    events: &[SessionEvent],
    path: &Path,
) -> io::Result<()> {
    let mut rec = SessionRecorder::create(path, header)?;
    let (mut i, mut j) = (0, 0);
    while i < samples.len() || j < events.len() {
        let take_sample = match (samples.get(i), events.get(j)) {
            (Some(s), Some(e)) => s.ts_ms <= e.ts_ms,
            (Some(_), None) => true,
            _ => false,
        };
        if take_sample {
            rec.sample(&samples[i])?;
            i += 1;
        } else {
            rec.event(&events[j])?;
            j += 1;
        }
    }
    rec.into_inner()?;
    Ok(())
}

fn parse_event(text: &str, line: usize) -> Result<SessionEvent, SessionError> {
    let err = |reason: String| SessionError::Parse { line, reason };
    let raw: EventLine = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    let event = match raw.event.as_str() {
        "confirm" => ControlEvent::Confirm,
        "advance" => ControlEvent::Advance,
        "reset" => ControlEvent::Reset,
        "move" => match (raw.x, raw.y) {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => ControlEvent::Move(Point::new(x, y)),
            _ => return Err(err("move event needs finite x and y".into())),
        },
        other => return Err(err(format!("unknown event `{other}`"))),
    };
    Ok(SessionEvent {
        ts_ms: raw.ts_ms,
        event,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub header: Option<SessionHeader>,
    pub entries: Vec<SessionEntry>,
}

/// Parses a session log. The header is optional so a bare scan log is a
/// valid (event-free) session. Timestamps must not go backwards.
pub fn read_session<R: BufRead>(source: R) -> Result<Session, SessionError> {
    let mut header = None;
    let mut entries: Vec<SessionEntry> = Vec::new();
    let mut last_ts = 0;
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SessionError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let entry = if value.get("session").is_some() {
            if header.is_some() || !entries.is_empty() {
                return Err(SessionError::Parse {
                    line: line_no,
                    reason: "header must be the first line".into(),
                });
            }
            let h: SessionHeader = serde_json::from_value(value).map_err(|e| SessionError::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            if h.session != SESSION_MAGIC || h.version != SESSION_VERSION {
                return Err(SessionError::Parse {
                    line: line_no,
                    reason: format!("unsupported session {} v{}", h.session, h.version),
                });
            }
            header = Some(h);
            continue;
        } else if value.get("event").is_some() {
            SessionEntry::Event(parse_event(text, line_no)?)
        } else {
            SessionEntry::Sample(parse_sample(text, line_no).map_err(|e| SessionError::Parse {
                line: line_no,
                reason: e.to_string(),
            })?)
        };
        if entry.ts_ms() < last_ts {
            return Err(SessionError::Parse {
                line: line_no,
                reason: format!("timestamp {} goes backwards", entry.ts_ms()),
            });
        }
        last_ts = entry.ts_ms();
        entries.push(entry);
    }
    Ok(Session { header, entries })
}

pub fn read_session_file(path: &Path) -> Result<Session, SessionError> {
    read_session(io::BufReader::new(File::open(path)?))
}
