//! WebSocket wire format. All frames are JSON text.

use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::room::Point;
use crate::snapshot::StateSnapshot;

/// Client to server.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Walk target in normalized room coordinates (sim mode only).
    Move { x: f64, y: f64 },
    Confirm,
    Advance,
    Reset,
}

/// Server to client.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame<'a> {
    Snapshot(&'a StateSnapshot),
    Error { reason: String },
}

pub fn snapshot_json(snapshot: &StateSnapshot) -> String {
    serde_json::to_string(&ServerFrame::Snapshot(snapshot)).expect("snapshot serializes")
}

pub fn error_json(reason: impl Into<String>) -> String {
    serde_json::to_string(&ServerFrame::Error {
        reason: reason.into(),
    })
    .expect("error frame serializes")
}

/// Control events accepted by the core loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlEvent {
    Move(Point),
    Confirm,
    Advance,
    Reset,
}

impl ControlEvent {
    pub fn name(&self) -> &'static str {
        match self {
            ControlEvent::Move(_) => "move",
            ControlEvent::Confirm => "confirm",
            ControlEvent::Advance => "advance",
            ControlEvent::Reset => "reset",
        }
    }
}

/// Checks whether `mode` accepts `event` from a client.
pub fn admit(event: &ControlEvent, mode: Mode) -> Result<(), String> {
    match (mode, event) {
        (Mode::Replay, _) => Err("replay mode is read-only".into()),
        (Mode::Live, ControlEvent::Move(_)) => Err("move is only available in sim mode".into()),
        _ => Ok(()),
    }
}

/// Parses one client frame and applies the mode guard. The `Err` value is
/// the reason to put in an error frame.
pub fn handle_client_message(text: &str, mode: Mode) -> Result<ControlEvent, String> {
    let msg: ClientMessage =
        serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
    let event = match msg {
        ClientMessage::Move { x, y } => {
            if !(x.is_finite() && y.is_finite()) {
                return Err("move coordinates must be finite".into());
            }
            ControlEvent::Move(Point::new(x, y))
        }
        ClientMessage::Confirm => ControlEvent::Confirm,
        ClientMessage::Advance => ControlEvent::Advance,
        ClientMessage::Reset => ControlEvent::Reset,
    };
    admit(&event, mode)?;
    Ok(event)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_client_frame() {
        assert_eq!(handle_client_message(r#"{"type":"confirm"}"#, Mode::Sim), Ok(ControlEvent::Confirm));
        assert_eq!(handle_client_message(r#"{"type":"advance"}"#, Mode::Live), Ok(ControlEvent::Advance));
        assert_eq!(handle_client_message(r#"{"type":"reset"}"#, Mode::Sim), Ok(ControlEvent::Reset));
        assert_eq!(
            handle_client_message(r#"{"type":"move","x":0.9,"y":0.9}"#, Mode::Sim),
            Ok(ControlEvent::Move(Point::new(0.9, 0.9)))
        );
    }

    #[test]
    fn malformed_frames_are_reported() {
        let err = handle_client_message("{not json", Mode::Sim).unwrap_err();
        assert!(err.starts_with("malformed message"));
        assert!(handle_client_message(r#"{"type":"teleport"}"#, Mode::Sim).is_err());
        assert!(handle_client_message(r#"{"type":"move","x":1}"#, Mode::Sim).is_err());
    }

    #[test]
    fn move_is_sim_only() {
        let mv = r#"{"type":"move","x":0.1,"y":0.1}"#;
        assert!(handle_client_message(mv, Mode::Replay).is_err());
        assert!(handle_client_message(mv, Mode::Live).is_err());
    }

    #[test]
    fn error_frame_shape() {
        let v: serde_json::Value = serde_json::from_str(&error_json("nope")).unwrap();
        assert_eq!(v, serde_json::json!({"type": "error", "reason": "nope"}));
    }
}
