//! Corner selection with hysteresis and a weighted-centroid position icon.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{estimate_distance, DistanceEstimate, FilteredSignal};
use crate::room::{Corner, Point, RoomModel, CORNER_COUNT};

pub const DEFAULT_ENTER_THRESHOLD: f64 = 1.5;
pub const DEFAULT_EXIT_THRESHOLD: f64 = 2.2;
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.5;
pub const DEFAULT_CENTROID_EXPONENT: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum LocalizationError {
    #[error("position unavailable: not every beacon has a usable signal")]
    PositionUnavailable,
    #[error("{field}: {reason}")]
    InvalidPolicy { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionPolicy {
    /// A corner becomes selectable below this distance, meters.
    #[serde(default = "default_enter")]
    pub enter_threshold: f64,
    /// A held corner is released at or above this distance, meters.
    #[serde(default = "default_exit")]
    pub exit_threshold: f64,
    #[serde(default = "default_min_confidence")]
    pub min_confidence: f64,
    #[serde(default = "default_exponent")]
    pub centroid_exponent: f64,
}

fn default_enter() -> f64 {
    DEFAULT_ENTER_THRESHOLD
}
fn default_exit() -> f64 {
    DEFAULT_EXIT_THRESHOLD
}
fn default_min_confidence() -> f64 {
    DEFAULT_MIN_CONFIDENCE
}
fn default_exponent() -> f64 {
    DEFAULT_CENTROID_EXPONENT
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            enter_threshold: DEFAULT_ENTER_THRESHOLD,
            exit_threshold: DEFAULT_EXIT_THRESHOLD,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            centroid_exponent: DEFAULT_CENTROID_EXPONENT,
        }
    }
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<(), LocalizationError> {
        let bad = |field, reason: &str| LocalizationError::InvalidPolicy {
            field,
            reason: reason.to_string(),
        };
        if !(self.enter_threshold.is_finite() && self.enter_threshold > 0.0) {
            return Err(bad("policy.enter_threshold", "must be > 0"));
        }
        if !(self.exit_threshold.is_finite() && self.exit_threshold > self.enter_threshold) {
            return Err(bad("policy.exit_threshold", "must exceed enter_threshold"));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(bad("policy.min_confidence", "must be within [0, 1]"));
        }
        if !(self.centroid_exponent.is_finite() && self.centroid_exponent > 0.0) {
            return Err(bad("policy.centroid_exponent", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CornerSelection {
    pub selected: Option<Corner>,
    /// When the current selection (or lack of one) began.
    pub since_ts: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationFrame {
    pub distances: [DistanceEstimate; CORNER_COUNT],
    pub selection: CornerSelection,
    /// Normalized room coordinates.
    pub position: Point,
    pub ts: u64,
}

impl LocalizationFrame {
    /// Frame before any sample has arrived: the player stands in the center.
    pub fn initial() -> Self {
        Self {
            distances: Corner::ALL.map(DistanceEstimate::absent),
            selection: CornerSelection::default(),
            position: Point::new(0.5, 0.5),
            ts: 0,
        }
    }
}

/// Lowest-distance corner among `candidates`; ties go to the lowest index.
pub fn closest_corner<'a>(
    candidates: impl IntoIterator<Item = &'a DistanceEstimate>,
) -> Option<Corner> {
    let mut best: Option<&DistanceEstimate> = None;
    for d in candidates {
        match best {
            Some(b) if d.distance < b.distance || (d.distance == b.distance && d.beacon_id < b.beacon_id) => {
                best = Some(d)
            }
            None => best = Some(d),
            _ => {}
        }
    }
    best.map(|d| d.beacon_id)
}

pub fn select_corner(
    distances: &[DistanceEstimate; CORNER_COUNT],
    policy: &SelectionPolicy,
    previous: CornerSelection,
    now_ms: u64,
) -> CornerSelection {
    let usable = |d: &&DistanceEstimate| d.confidence >= policy.min_confidence;
    let fresh = closest_corner(
        distances
            .iter()
            .filter(usable)
            .filter(|d| d.distance < policy.enter_threshold),
    );

    let held = previous.selected.filter(|&corner| {
        let d = &distances[corner.index()];
        usable(&d) && d.distance < policy.exit_threshold
    });

    match (held, fresh) {
        (Some(h), Some(c)) if c != h && distances[c.index()].distance < distances[h.index()].distance => {
            CornerSelection {
                selected: Some(c),
                since_ts: now_ms,
            }
        }
        (Some(_), _) => previous,
        (None, fresh) if fresh == previous.selected => previous,
        (None, fresh) => CornerSelection {
            selected: fresh,
            since_ts: now_ms,
        },
    }
}

/// Weighted centroid of the corners with weights `1 / max(d, d_min)^g`.
pub fn estimate_position(
    distances: &[DistanceEstimate; CORNER_COUNT],
    room: &RoomModel,
    policy: &SelectionPolicy,
) -> Result<Point, LocalizationError> {
    if distances.iter().any(|d| !(d.confidence > 0.0)) {
        return Err(LocalizationError::PositionUnavailable);
    }
    let d_min = room.propagation.d_min;
    let (mut wx, mut wy, mut total) = (0.0, 0.0, 0.0);
    for d in distances {
        let w = d.distance.max(d_min).powf(-policy.centroid_exponent);
        let c = d.beacon_id.normalized();
        wx += w * c.x;
        wy += w * c.y;
        total += w;
    }
    if !(total.is_finite() && total > 0.0) {
        return Err(LocalizationError::PositionUnavailable);
    }
    Ok(Point::new((wx / total).clamp(0.0, 1.0), (wy / total).clamp(0.0, 1.0)))
}

/// Distance estimate for one beacon at `now_ms`: absent when never heard,
/// confidence zero when stale.
pub fn distance_at(
    signal: Option<&FilteredSignal>,
    corner: Corner,
    room: &RoomModel,
    now_ms: u64,
) -> DistanceEstimate {
    let Some(signal) = signal else {
        return DistanceEstimate::absent(corner);
    };
    match estimate_distance(signal, &room.propagation, room.beacon(corner).tx_power_1m) {
        Ok(mut est) => {
            if signal.is_stale(now_ms) {
                est.confidence = 0.0;
            }
            est
        }
        Err(_) => DistanceEstimate::absent(corner),
    }
}

/// One localization step. Pure in its inputs.
pub fn tick(
    signals: &[Option<FilteredSignal>; CORNER_COUNT],
    room: &RoomModel,
    policy: &SelectionPolicy,
    previous: &LocalizationFrame,
    now_ms: u64,
) -> LocalizationFrame {
    let now_ms = now_ms.max(previous.ts);
    let distances = Corner::ALL.map(|c| distance_at(signals[c.index()].as_ref(), c, room, now_ms));
    let selection = select_corner(&distances, policy, previous.selection, now_ms);
    let position = estimate_position(&distances, room, policy).unwrap_or(previous.position);
    LocalizationFrame {
        distances,
        selection,
        position,
        ts: now_ms,
    }
}
