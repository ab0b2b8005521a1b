//! Per-beacon moving-average filtering and distance inversion.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::room::{Corner, PropagationParams, RoomModel, CORNER_COUNT};
use crate::scanlog::RssiSample;

/// Number of most recent broadcasts averaged per beacon.
pub const DEFAULT_WINDOW_SIZE: usize = 10;
/// Upper clamp for inverted distances, meters.
pub const D_MAX: f64 = 50.0;
/// A beacon silent for longer than this is treated as lost.
pub const STALE_AFTER_MS: u64 = 2000;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("no samples received for beacon {0}")]
    NoData(Corner),
    #[error("window size must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    UnknownBeacon,
    OutOfOrder,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PipelineCounters {
    pub accepted: u64,
    pub unknown_beacon: u64,
    pub out_of_order: u64,
}

/// Sliding window over the most recent `window_size` readings of one beacon.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    beacon_id: Corner,
    window: VecDeque<f64>,
    window_size: usize,
    last_ts: Option<u64>,
}

impl FilterState {
    pub fn new(beacon_id: Corner, window_size: usize) -> Result<Self, PipelineError> {
        if window_size == 0 {
            return Err(PipelineError::ZeroWindow);
        }
        Ok(Self {
            beacon_id,
            window: VecDeque::with_capacity(window_size),
            window_size,
            last_ts: None,
        })
    }

    fn push(&mut self, rssi: f64, ts_ms: u64) {
        if self.window.len() == self.window_size {
            self.window.pop_front();
        }
        self.window.push_back(rssi);
        self.last_ts = Some(ts_ms);
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn window(&self) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    /// Current mean; `None` while the window is empty.
    pub fn signal(&self) -> Option<FilteredSignal> {
        let last_ts = self.last_ts?;
        if self.window.is_empty() {
            return None;
        }
        // Re-summed every time: at most `window_size` terms, no drift.
        let sum: f64 = self.window.iter().sum();
        Some(FilteredSignal {
            beacon_id: self.beacon_id,
            mean_rssi: sum / self.window.len() as f64,
            sample_count: self.window.len(),
            window_size: self.window_size,
            last_ts,
        })
    }

    fn clear(&mut self) {
        self.window.clear();
        self.last_ts = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilteredSignal {
    pub beacon_id: Corner,
    pub mean_rssi: f64,
    pub sample_count: usize,
    pub window_size: usize,
    pub last_ts: u64,
}

impl FilteredSignal {
    pub fn confidence(&self) -> f64 {
        (self.sample_count as f64 / self.window_size as f64).min(1.0)
    }

    pub fn is_stale(&self, now_ms: u64) -> bool {
        now_ms.saturating_sub(self.last_ts) > STALE_AFTER_MS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub beacon_id: Corner,
    pub distance: f64,
    pub confidence: f64,
}

impl DistanceEstimate {
    /// Placeholder for a beacon that has not been heard from.
    pub fn absent(beacon_id: Corner) -> Self {
        Self {
            beacon_id,
            distance: D_MAX,
            confidence: 0.0,
        }
    }
}

/// Inverts the log-distance model on the filtered mean:
/// `d = 10^((tx_power_1m - mean) / (10 n))`, clamped to `[d_min, D_MAX]`.
pub fn estimate_distance(
    signal: &FilteredSignal,
    params: &PropagationParams,
    tx_power_1m: f64,
) -> Result<DistanceEstimate, PipelineError> {
    if signal.sample_count == 0 {
        return Err(PipelineError::NoData(signal.beacon_id));
    }
    let exponent = (tx_power_1m - signal.mean_rssi) / (10.0 * params.path_loss_exponent);
    let distance = 10f64.powf(exponent).clamp(params.d_min, D_MAX.max(params.d_min));
    Ok(DistanceEstimate {
        beacon_id: signal.beacon_id,
        distance,
        confidence: signal.confidence(),
    })
}

/// The four per-beacon filters plus rejection bookkeeping.
#[derive(Debug, Clone)]
pub struct FilterSet {
    states: [FilterState; CORNER_COUNT],
    uuids: [Uuid; CORNER_COUNT],
    counters: PipelineCounters,
}

impl FilterSet {
    pub fn new(uuids: [Uuid; CORNER_COUNT], window_size: usize) -> Result<Self, PipelineError> {
        let states = [
            FilterState::new(Corner::NW, window_size)?,
            FilterState::new(Corner::NE, window_size)?,
            FilterState::new(Corner::SW, window_size)?,
            FilterState::new(Corner::SE, window_size)?,
        ];
        Ok(Self {
            states,
            uuids,
            counters: PipelineCounters::default(),
        })
    }

    pub fn for_room(room: &RoomModel, window_size: usize) -> Result<Self, PipelineError> {
        Self::new(room.beacons.clone().map(|b| b.uuid), window_size)
    }

    pub fn window_size(&self) -> usize {
        self.states[0].window_size
    }

    /// Adds a sample to its beacon's window. Samples whose uuid does not
    /// match the beacon id, or that go back in time for that beacon, are
    /// rejected and counted.
    pub fn push_sample(&mut self, sample: &RssiSample) -> Result<FilteredSignal, Rejection> {
        let idx = sample.beacon_id.index();
        if self.uuids[idx] != sample.uuid || !sample.rssi_dbm.is_finite() {
            self.counters.unknown_beacon += 1;
            return Err(Rejection::UnknownBeacon);
        }
        let state = &mut self.states[idx];
        if state.last_ts.is_some_and(|last| sample.ts_ms < last) {
            self.counters.out_of_order += 1;
            return Err(Rejection::OutOfOrder);
        }
        state.push(sample.rssi_dbm, sample.ts_ms);
        self.counters.accepted += 1;
        Ok(state.signal().expect("window just received a sample"))
    }

    pub fn state(&self, corner: Corner) -> &FilterState {
        &self.states[corner.index()]
    }

    pub fn signal(&self, corner: Corner) -> Option<FilteredSignal> {
        self.states[corner.index()].signal()
    }

    pub fn signals(&self) -> [Option<FilteredSignal>; CORNER_COUNT] {
        Corner::ALL.map(|c| self.signal(c))
    }

    pub fn counters(&self) -> PipelineCounters {
        self.counters
    }

    /// Empties every window and zeroes the counters.
    pub fn reset(&mut self) {
        for state in &mut self.states {
            state.clear();
        }
        self.counters = PipelineCounters::default();
    }
}
