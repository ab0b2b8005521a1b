//! Seedable stand-in for the four beacons and the radio channel.
//!
//! Received power follows the log-distance model
//! `rssi = tx_power_1m - 10 n log10(max(d, d_min) / 1 m) + N(0, sigma)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::room::{Corner, Point, RoomModel, CORNER_COUNT};
use crate::scanlog::RssiSample;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Noise-free received power for a beacon at distance `distance_m`.
pub fn mean_rssi(tx_power_1m: f64, path_loss_exponent: f64, d_min: f64, distance_m: f64) -> f64 {
    tx_power_1m - 10.0 * path_loss_exponent * distance_m.max(d_min).log10()
}

/// One received signal strength draw from `beacon_id` for a player at
/// `player` (meters).
pub fn rssi_at<R: Rng + ?Sized>(
    room: &RoomModel,
    beacon_id: u8,
    player: Point,
    rng: &mut R,
) -> Result<f64, SimError> {
    let corner = Corner::new(beacon_id)
        .ok_or_else(|| SimError::InvalidArgument(format!("beacon id {beacon_id} out of range")))?;
    if !room.contains(player) {
        return Err(SimError::InvalidArgument(format!(
            "player ({}, {}) outside {} x {} m room",
            player.x, player.y, room.width, room.depth
        )));
    }
    let beacon = room.beacon(corner);
    let p = &room.propagation;
    let clean = mean_rssi(
        beacon.tx_power_1m,
        p.path_loss_exponent,
        p.d_min,
        beacon.position.distance(player),
    );
    if p.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, p.noise_sigma)
            .map_err(|e| SimError::InvalidArgument(e.to_string()))?;
        Ok(clean + noise.sample(rng))
    } else {
        Ok(clean)
    }
}

pub trait Trajectory {
    /// Player position in meters at `ts_ms`.
    fn position_at(&self, ts_ms: u64) -> Point;
}

/// Piecewise-linear path through timestamped waypoints. Before the first
/// waypoint the player stands at it; after the last likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerPath {
    waypoints: Vec<(u64, Point)>,
}

impl PlayerPath {
    pub fn new(waypoints: Vec<(u64, Point)>) -> Result<Self, SimError> {
        if waypoints.is_empty() {
            return Err(SimError::InvalidArgument("path needs at least one waypoint".into()));
        }
        if waypoints.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(SimError::InvalidArgument("waypoint timestamps must be non-decreasing".into()));
        }
        Ok(Self { waypoints })
    }

    pub fn stationary(at: Point) -> Self {
        Self {
            waypoints: vec![(0, at)],
        }
    }

    /// Walks through `points` at a constant `speed_mps`, leaving the first
    /// point at `start_ms`.
    pub fn walk(start_ms: u64, points: &[Point], speed_mps: f64) -> Result<Self, SimError> {
        if !(speed_mps.is_finite() && speed_mps > 0.0) {
            return Err(SimError::InvalidArgument("walking speed must be > 0".into()));
        }
        let mut waypoints = Vec::with_capacity(points.len());
        let mut t = start_ms as f64;
        for (i, &p) in points.iter().enumerate() {
            if i > 0 {
                t += points[i - 1].distance(p) / speed_mps * 1000.0;
            }
            waypoints.push((t.round() as u64, p));
        }
        Self::new(waypoints)
    }

    /// Replaces the remaining path by a straight walk from wherever the
    /// player is at `now_ms` to `target`.
    pub fn retarget(&mut self, now_ms: u64, target: Point, speed_mps: f64) {
        let here = self.position_at(now_ms);
        let secs = here.distance(target) / speed_mps;
        let arrive = now_ms + (secs * 1000.0).round() as u64;
        self.waypoints = vec![(now_ms, here), (arrive, target)];
    }

    pub fn end_ms(&self) -> u64 {
        self.waypoints.last().map(|w| w.0).unwrap_or(0)
    }

    pub fn waypoints(&self) -> &[(u64, Point)] {
        &self.waypoints
    }
}

impl Trajectory for PlayerPath {
    fn position_at(&self, ts_ms: u64) -> Point {
        let first = self.waypoints[0];
        if ts_ms <= first.0 {
            return first.1;
        }
        for w in self.waypoints.windows(2) {
            let ((t0, p0), (t1, p1)) = (w[0], w[1]);
            if ts_ms <= t1 {
                if t1 == t0 {
                    return p1;
                }
                let frac = (ts_ms - t0) as f64 / (t1 - t0) as f64;
                return p0.lerp(p1, frac);
            }
        }
        self.waypoints[self.waypoints.len() - 1].1
    }
}

impl Trajectory for Point {
    fn position_at(&self, _ts_ms: u64) -> Point {
        *self
    }
}

/// Broadcast scheduler plus channel model. Each beacon emits at multiples
/// of its advertising interval; the first broadcast happens one interval
/// after the clock origin.
#[derive(Debug, Clone)]
pub struct Simulator {
    room: RoomModel,
    rng: ChaCha8Rng,
    clock_ms: u64,
    next_emit_ms: [u64; CORNER_COUNT],
}

impl Simulator {
    pub fn new(room: RoomModel, seed: u64) -> Self {
        let next_emit_ms = room.beacons.clone().map(|b| b.advertise_interval_ms);
        Self {
            room,
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock_ms: 0,
            next_emit_ms,
        }
    }

    pub fn room(&self) -> &RoomModel {
        &self.room
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    /// Emits every broadcast in `(clock, until]`, ordered by timestamp and
    /// then beacon id, and moves the clock to `until`.
    pub fn advance<T: Trajectory + ?Sized>(
        &mut self,
        path: &T,
        until_ms: u64,
    ) -> Result<Vec<RssiSample>, SimError> {
        if until_ms < self.clock_ms {
            return Err(SimError::InvalidArgument(format!(
                "cannot advance backwards from {} ms to {until_ms} ms",
                self.clock_ms
            )));
        }
        let mut due: Vec<(u64, Corner)> = Vec::new();
        for corner in Corner::ALL {
            let interval = self.room.beacon(corner).advertise_interval_ms;
            let mut t = self.next_emit_ms[corner.index()];
            while t <= until_ms {
                due.push((t, corner));
                t += interval;
            }
        }
        due.sort_unstable();

        let mut samples = Vec::with_capacity(due.len());
        for (ts_ms, corner) in due {
            let player = path.position_at(ts_ms);
            let rssi = rssi_at(&self.room, corner.id(), player, &mut self.rng)?;
            let beacon = self.room.beacon(corner);
            samples.push(RssiSample {
                ts_ms,
                beacon_id: corner,
                uuid: beacon.uuid,
                rssi_dbm: rssi,
            });
            self.next_emit_ms[corner.index()] = ts_ms + beacon.advertise_interval_ms;
        }
        self.clock_ms = until_ms;
        Ok(samples)
    }
}
