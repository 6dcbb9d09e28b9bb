use serde::{Deserialize, Serialize};

use super::vitals::VitalsFrame;

/// Alert latches. Each condition fires once per excursion and re-arms when
/// the reading returns to the normal side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlertState {
    pub email_sent: bool,
    pub spo2_email_sent: bool,
    pub threshold_f: f64,
    pub spo2_floor: f64,
}

impl Default for AlertState {
    fn default() -> Self {
        Self {
            email_sent: false,
            spo2_email_sent: false,
            threshold_f: 100.0,
            spo2_floor: 90.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlertParameter {
    #[serde(rename = "objectTempF")]
    ObjectTempF,
    #[serde(rename = "spo2")]
    Spo2,
}

impl AlertParameter {
    pub fn key(self) -> &'static str {
        match self {
            AlertParameter::ObjectTempF => "objectTempF",
            AlertParameter::Spo2 => "spo2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub timestamp: f64,
    pub parameter: AlertParameter,
    pub value: f64,
    pub threshold: f64,
    pub vitals: VitalsFrame,
}

/// Fires when `temp_f >= threshold` with the latch open; re-arms below it.
pub fn temperature_gate(state: &AlertState, temp_f: f64) -> (AlertState, bool) {
    let mut next = *state;
    if temp_f >= state.threshold_f && !state.email_sent {
        next.email_sent = true;
        (next, true)
    } else {
        if temp_f < state.threshold_f {
            next.email_sent = false;
        }
        (next, false)
    }
}

/// Fires when `spo2 < floor` with the latch open; re-arms at or above it.
/// An unavailable reading leaves the latch untouched.
pub fn spo2_gate(state: &AlertState, spo2: Option<f64>) -> (AlertState, bool) {
    let mut next = *state;
    let Some(s) = spo2 else {
        return (next, false);
    };
    if s < state.spo2_floor && !state.spo2_email_sent {
        next.spo2_email_sent = true;
        (next, true)
    } else {
        if s >= state.spo2_floor {
            next.spo2_email_sent = false;
        }
        (next, false)
    }
}

/// Both latches against one vitals snapshot.
pub fn alert_gate(state: &AlertState, vitals: &VitalsFrame) -> (AlertState, Vec<AlertEvent>) {
    let mut events = Vec::new();
    let (s, fired) = temperature_gate(state, vitals.object_temp_f);
    if fired {
        events.push(AlertEvent {
            timestamp: vitals.timestamp,
            parameter: AlertParameter::ObjectTempF,
            value: vitals.object_temp_f,
            threshold: s.threshold_f,
            vitals: *vitals,
        });
    }
    let (s, fired) = spo2_gate(&s, vitals.spo2);
    if fired {
        events.push(AlertEvent {
            timestamp: vitals.timestamp,
            parameter: AlertParameter::Spo2,
            value: vitals.spo2.unwrap_or_default(),
            threshold: s.spo2_floor,
            vitals: *vitals,
        });
    }
    (s, events)
}
