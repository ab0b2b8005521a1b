//! Room geometry and the four corner-mounted beacons.
//!
//! Corners are enumerated in a fixed top-view order: 0 = NW, 1 = NE,
//! 2 = SW, 3 = SE. Room coordinates are meters with the origin in the NW
//! corner, `x` growing east and `y` growing south; normalized coordinates
//! map the room onto the unit square with the same orientation.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

pub const CORNER_COUNT: usize = 4;

pub const DEFAULT_TX_POWER_1M: f64 = -59.0;
pub const DEFAULT_PATH_LOSS_EXPONENT: f64 = 2.0;
pub const DEFAULT_NOISE_SIGMA: f64 = 2.0;
pub const DEFAULT_D_MIN: f64 = 0.1;
pub const DEFAULT_ADVERTISE_INTERVAL_MS: u64 = 100;

pub const MIN_ROOM_SIDE: f64 = 2.0;
pub const MAX_ROOM_SIDE: f64 = 50.0;

const DEFAULT_UUIDS: [&str; CORNER_COUNT] = [
    "e2c56db5-dffb-48d2-b060-d0f5a71096e0",
    "e2c56db5-dffb-48d2-b060-d0f5a71096e1",
    "e2c56db5-dffb-48d2-b060-d0f5a71096e2",
    "e2c56db5-dffb-48d2-b060-d0f5a71096e3",
];

#[derive(Debug, Error, PartialEq)]
pub enum RoomError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> RoomError {
    RoomError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// A corner of the room, which is also the id of the beacon mounted there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Corner(u8);

impl Corner {
    pub const NW: Corner = Corner(0);
    pub const NE: Corner = Corner(1);
    pub const SW: Corner = Corner(2);
    pub const SE: Corner = Corner(3);
    pub const ALL: [Corner; CORNER_COUNT] = [Self::NW, Self::NE, Self::SW, Self::SE];

    pub fn new(index: u8) -> Option<Corner> {
        (usize::from(index) < CORNER_COUNT).then_some(Corner(index))
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Corner position on the unit square.
    pub fn normalized(self) -> Point {
        let x = if self.0 % 2 == 0 { 0.0 } else { 1.0 };
        let y = if self.0 < 2 { 0.0 } else { 1.0 };
        Point::new(x, y)
    }
}

impl TryFrom<u8> for Corner {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Corner::new(value).ok_or_else(|| format!("corner index {value} out of range 0-3"))
    }
}

impl From<Corner> for u8 {
    fn from(c: Corner) -> u8 {
        c.0
    }
}

impl std::fmt::Display for Corner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeaconSpec {
    pub id: Corner,
    pub uuid: Uuid,
    pub position: Point,
    pub tx_power_1m: f64,
    pub advertise_interval_ms: u64,
}

/// Log-distance path-loss parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationParams {
    #[serde(default = "default_exponent")]
    pub path_loss_exponent: f64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_d_min")]
    pub d_min: f64,
}

fn default_exponent() -> f64 {
    DEFAULT_PATH_LOSS_EXPONENT
}
fn default_sigma() -> f64 {
    DEFAULT_NOISE_SIGMA
}
fn default_d_min() -> f64 {
    DEFAULT_D_MIN
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            path_loss_exponent: DEFAULT_PATH_LOSS_EXPONENT,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            d_min: DEFAULT_D_MIN,
        }
    }
}

impl PropagationParams {
    pub fn noise_free(self) -> Self {
        Self {
            noise_sigma: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), RoomError> {
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0) {
            return Err(invalid("propagation.path_loss_exponent", "must be > 0"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid("propagation.noise_sigma", "must be >= 0"));
        }
        if !(self.d_min.is_finite() && self.d_min > 0.0) {
            return Err(invalid("propagation.d_min", "must be > 0"));
        }
        Ok(())
    }
}

/// Display legend for one corner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CornerLabel {
    pub color: String,
    pub number: u8,
}

pub fn default_corner_labels() -> [CornerLabel; CORNER_COUNT] {
    ["blue", "red", "green", "yellow"]
        .into_iter()
        .zip(1u8..)
        .map(|(color, number)| CornerLabel {
            color: color.to_string(),
            number,
        })
        .collect::<Vec<_>>()
        .try_into()
        .expect("four labels")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomModel {
    pub width: f64,
    pub depth: f64,
    pub beacons: [BeaconSpec; CORNER_COUNT],
    pub propagation: PropagationParams,
    pub corner_labels: [CornerLabel; CORNER_COUNT],
}

impl RoomModel {
    /// Room with default beacons (shared tx power and interval) at its corners.
    pub fn new(width: f64, depth: f64, propagation: PropagationParams) -> Result<Self, RoomError> {
        Self::with_beacon_defaults(
            width,
            depth,
            propagation,
            DEFAULT_TX_POWER_1M,
            DEFAULT_ADVERTISE_INTERVAL_MS,
        )
    }

    pub fn with_beacon_defaults(
        width: f64,
        depth: f64,
        propagation: PropagationParams,
        tx_power_1m: f64,
        advertise_interval_ms: u64,
    ) -> Result<Self, RoomError> {
        let beacons = Corner::ALL.map(|corner| BeaconSpec {
            id: corner,
            uuid: Uuid::parse_str(DEFAULT_UUIDS[corner.index()]).expect("valid default uuid"),
            position: corner_position(width, depth, corner),
            tx_power_1m,
            advertise_interval_ms,
        });
        let room = Self {
            width,
            depth,
            beacons,
            propagation,
            corner_labels: default_corner_labels(),
        };
        room.validate()?;
        Ok(room)
    }

    /// Default 6 m x 6 m room.
    pub fn square(side: f64) -> Result<Self, RoomError> {
        Self::new(side, side, PropagationParams::default())
    }

    pub fn validate(&self) -> Result<(), RoomError> {
        for (name, side) in [("room.width", self.width), ("room.depth", self.depth)] {
            if !(MIN_ROOM_SIDE..=MAX_ROOM_SIDE).contains(&side) {
                return Err(invalid(
                    name,
                    format!("must be within [{MIN_ROOM_SIDE}, {MAX_ROOM_SIDE}] m, got {side}"),
                ));
            }
        }
        self.propagation.validate()?;
        for (k, beacon) in self.beacons.iter().enumerate() {
            let field = |f: &str| format!("room.beacons[{k}].{f}");
            if beacon.id.index() != k {
                return Err(invalid(field("id"), format!("beacon {k} must have id {k}")));
            }
            let expected = corner_position(self.width, self.depth, beacon.id);
            if beacon.position.distance(expected) > 1e-9 {
                return Err(invalid(field("position"), "must coincide with its corner"));
            }
            if beacon.advertise_interval_ms == 0 {
                return Err(invalid(field("advertise_interval_ms"), "must be > 0"));
            }
            if !beacon.tx_power_1m.is_finite() {
                return Err(invalid(field("tx_power_1m"), "must be finite"));
            }
            if self.beacons[..k].iter().any(|b| b.uuid == beacon.uuid) {
                return Err(invalid(field("uuid"), "duplicate beacon uuid"));
            }
        }
        Ok(())
    }

    pub fn beacon(&self, corner: Corner) -> &BeaconSpec {
        &self.beacons[corner.index()]
    }

    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.depth / 2.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.depth).contains(&p.y)
    }

    pub fn to_normalized(&self, p: Point) -> Point {
        Point::new(p.x / self.width, p.y / self.depth)
    }

    /// Maps a normalized point (clamped to the unit square) into meters.
    pub fn from_normalized(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(0.0, 1.0) * self.width,
            p.y.clamp(0.0, 1.0) * self.depth,
        )
    }

    pub fn corner_for_uuid(&self, uuid: &Uuid) -> Option<Corner> {
        self.beacons.iter().find(|b| &b.uuid == uuid).map(|b| b.id)
    }
}

pub fn corner_position(width: f64, depth: f64, corner: Corner) -> Point {
    let n = corner.normalized();
    Point::new(n.x * width, n.y * depth)
}
