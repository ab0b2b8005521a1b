//! NDJSON scan log: one received advertisement per line.
//!
//! `{"ts_ms": 1200, "beacon_id": 2, "uuid": "...", "rssi_dbm": -63.5}`

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::room::Corner;

/// One received beacon advertisement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RssiSample {
    pub ts_ms: u64,
    pub beacon_id: Corner,
    pub uuid: Uuid,
    pub rssi_dbm: f64,
}

#[derive(Debug, Error)]
pub enum ScanLogError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ScanLogError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ScanLogError::Parse { line, .. } => Some(*line),
            ScanLogError::Io(_) => None,
        }
    }
}

pub fn write_sample<W: Write>(sink: &mut W, sample: &RssiSample) -> io::Result<()> {
    serde_json::to_writer(&mut *sink, sample)?;
    sink.write_all(b"\n")
}

pub fn write_scan_log<W: Write>(samples: &[RssiSample], mut sink: W) -> io::Result<()> {
    for sample in samples {
        write_sample(&mut sink, sample)?;
    }
    sink.flush()
}

/// Parses and validates a single scan-log line. `line` is 1-based and only
/// used for error reporting.
pub fn parse_sample(text: &str, line: usize) -> Result<RssiSample, ScanLogError> {
    let sample: RssiSample = serde_json::from_str(text).map_err(|e| ScanLogError::Parse {
        line,
        reason: e.to_string(),
    })?;
    if !sample.rssi_dbm.is_finite() {
        return Err(ScanLogError::Parse {
            line,
            reason: "rssi_dbm must be finite".into(),
        });
    }
    Ok(sample)
}

/// Streaming reader over a scan log. Blank lines are skipped.
pub struct ScanLogReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> ScanLogReader<R> {
    pub fn new(source: R) -> Self {
        Self {
            lines: source.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for ScanLogReader<R> {
    type Item = Result<RssiSample, ScanLogError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(parse_sample(&line, self.line_no));
        }
    }
}

pub fn read_scan_log<R: BufRead>(source: R) -> Result<Vec<RssiSample>, ScanLogError> {
    ScanLogReader::new(source).collect()
}
