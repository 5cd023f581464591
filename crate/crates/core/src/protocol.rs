//! JSON wire format for the session channel.
//!
//! Client frames are `{"kind":"command","name":...,"args":...}`.
//! Server frames are `{"kind":"snapshot"|"error"|"ack","payload":...}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{ServerMessage, SessionCommand};

/// Frames above this size are rejected on encode.
pub const MAX_FRAME_BYTES: usize = 256 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClientMessage {
    Command(SessionCommand),
}

fn encode<T: Serialize>(value: &T) -> Result<String> {
    let text = serde_json::to_string(value).map_err(|e| Error::Decode(e.to_string()))?;
    if text.len() > MAX_FRAME_BYTES {
        return Err(Error::contract(format!(
            "frame of {} bytes exceeds the {MAX_FRAME_BYTES} byte limit",
            text.len()
        )));
    }
    Ok(text)
}

fn decode<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))
}

pub fn encode_server(msg: &ServerMessage) -> Result<String> {
    encode(msg)
}

pub fn decode_server(text: &str) -> Result<ServerMessage> {
    decode(text)
}

pub fn encode_client(msg: &ClientMessage) -> Result<String> {
    encode(msg)
}

pub fn decode_client(text: &str) -> Result<ClientMessage> {
    decode(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Distribution, Preset};
    use crate::gan::{ConfigChange, GanConfig, LossKind};
    use crate::session::{Session, SessionOptions};

    #[test]
    fn command_wire_shape() {
        let msg = ClientMessage::Command(SessionCommand::SetConfig(ConfigChange::LrD(0.01)));
        let text = encode_client(&msg).unwrap();
        assert_eq!(
            text,
            r#"{"kind":"command","name":"SetConfig","args":{"field":"lr_d","value":0.01}}"#
        );
        assert_eq!(decode_client(&text).unwrap(), msg);
        let play = decode_client(r#"{"kind":"command","name":"Play"}"#).unwrap();
        assert_eq!(play, ClientMessage::Command(SessionCommand::Play));
    }

    #[test]
    fn commands_round_trip() {
        let cmds = vec![
            SessionCommand::Play,
            SessionCommand::Pause,
            SessionCommand::StepBoth,
            SessionCommand::StepDiscriminator,
            SessionCommand::StepGenerator,
            SessionCommand::SlowMotionOn,
            SessionCommand::SlowMotionOff,
            SessionCommand::SetConfig(ConfigChange::Loss(LossKind::LeastSquares)),
            SessionCommand::SetConfig(ConfigChange::GenLayers(vec![8, 8])),
            SessionCommand::SetDistribution(Preset::Ring.into()),
            SessionCommand::SetDistribution(
                Distribution::from_drawn_points((0..10).map(|i| [i as f64 / 10.0, 0.5]).collect()).unwrap(),
            ),
            SessionCommand::Reset { seed: 9 },
            SessionCommand::SetFrameInterval { epochs: 3 },
            SessionCommand::SetSlowTick { millis: 200 },
        ];
        for cmd in cmds {
            let msg = ClientMessage::Command(cmd);
            assert_eq!(decode_client(&encode_client(&msg).unwrap()).unwrap(), msg);
        }
    }

    #[test]
    fn malformed_frames_are_decode_errors() {
        for text in [
            "",
            "{",
            "null",
            r#"{"kind":"command"}"#,
            r#"{"kind":"command","name":"Explode"}"#,
            r#"{"kind":"command","name":"SetConfig","args":{"field":"lr_d","value":"fast"}}"#,
            r#"{"kind":"command","name":"SetDistribution","args":{"kind":"drawn","points":[[2.0,0.5]]}}"#,
            r#"{"kind":"snapshot","name":"Play"}"#,
        ] {
            assert!(matches!(decode_client(text), Err(Error::Decode(_))), "{text:?}");
        }
    }

    #[test]
    fn snapshot_round_trips_and_fits_frame() {
        let mut s = Session::new(GanConfig::default(), Preset::Ring.into(), 3, SessionOptions::default()).unwrap();
        s.handle(SessionCommand::StepBoth).unwrap();
        let msg = ServerMessage::Snapshot(Box::new(s.snapshot().unwrap()));
        let text = encode_server(&msg).unwrap();
        assert!(text.len() < MAX_FRAME_BYTES);
        assert!(text.starts_with(r#"{"kind":"snapshot","payload":{"#));
        assert_eq!(decode_server(&text).unwrap(), msg);
    }

    #[test]
    fn error_frame_shape() {
        let err = Error::InvalidTransition {
            command: "Play",
            mode: "running",
        };
        let text = encode_server(&ServerMessage::error(&err, 7)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["kind"], "error");
        assert_eq!(v["payload"]["epoch"], 7);
        assert_eq!(v["payload"]["code"], err.code());
    }
}
