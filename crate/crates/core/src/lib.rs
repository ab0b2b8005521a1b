//! Indoor-positioning quiz built on BLE signal strength.
//!
//! Four beacons sit in the corners of a room. Their received signal
//! strength is smoothed with a per-beacon moving average, inverted into
//! distances, and used to pick the corner the player walked to. The chosen
//! corner highlights one of four answers in a prize-ladder quiz.

pub mod config;
pub mod engine;
pub mod game;
pub mod localization;
pub mod pipeline;
pub mod protocol;
pub mod room;
pub mod scanlog;
pub mod server;
pub mod session;
pub mod sim;
pub mod snapshot;
