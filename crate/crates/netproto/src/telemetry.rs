//! Telemetry schema shared by the event log, the live stream and the status
//! endpoint. Every event is one JSON object `{t, kind, body}` per line.

use serde::{Deserialize, Serialize};
use wheelsim_core::base::MotorState;
use wheelsim_core::health::VitalsFrame;
use wheelsim_core::Command;

pub mod kind {
    pub const STARTUP: &str = "startup";
    pub const COMMAND: &str = "command";
    pub const CHAIR: &str = "chair";
    pub const OVERRIDE: &str = "override";
    pub const VITALS: &str = "vitals";
    pub const DETECTION: &str = "detection";
    pub const UTTERANCE: &str = "utterance";
    pub const ALERT: &str = "alert";
    pub const EMAIL: &str = "email";
    pub const UPLOAD: &str = "upload";
    pub const SHUTDOWN: &str = "shutdown";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub t: f64,
    pub kind: String,
    pub body: serde_json::Value,
}

impl TelemetryEvent {
    pub fn new(t: f64, kind: &str, body: impl Serialize) -> Self {
        let body = serde_json::to_value(body).expect("telemetry bodies are plain data");
        Self { t, kind: kind.to_string(), body }
    }

    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("telemetry events serialize");
        s.push('\n');
        s
    }

    pub fn parse_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Per-tick base snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChairTelemetry {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub motor: MotorState,
    pub distance_cm: f64,
    pub last_command: Command,
    pub override_active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlertFlags {
    /// Temperature latch is set.
    pub temperature: bool,
    pub spo2: bool,
}

/// Document served by the status endpoint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatusSnapshot {
    pub running: bool,
    pub time: f64,
    pub chair: Option<ChairTelemetry>,
    pub vitals: Option<VitalsFrame>,
    pub alerts: AlertFlags,
    pub uploads: u64,
    pub command_frame_errors: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let e = TelemetryEvent::new(1.5, kind::COMMAND, serde_json::json!({"command": "F"}));
        let line = e.to_json_line();
        assert_eq!(line, "{\"t\":1.5,\"kind\":\"command\",\"body\":{\"command\":\"F\"}}\n");
        assert_eq!(TelemetryEvent::parse_line(line.trim_end()).unwrap(), e);
    }
}
