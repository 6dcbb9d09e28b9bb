use serde::{Deserialize, Serialize};

use crate::world::LeadStatus;

pub fn c_to_f(c: f64) -> f64 {
    c * 9.0 / 5.0 + 32.0
}

/// Current readings. `None` marks a vital that is still warming up or could
/// not be computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VitalsFrame {
    pub beats_per_minute: Option<f64>,
    pub spo2: Option<f64>,
    pub ecg_value: i32,
    pub ambient_temp_c: f64,
    pub object_temp_c: f64,
    pub object_temp_f: f64,
    pub lead_status: LeadStatus,
    pub timestamp: f64,
}

impl VitalsFrame {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        timestamp: f64,
        beats_per_minute: Option<f64>,
        spo2: Option<f64>,
        ecg_value: i32,
        ambient_temp_c: f64,
        object_temp_c: f64,
        lead_status: LeadStatus,
    ) -> Self {
        Self {
            beats_per_minute,
            spo2,
            ecg_value,
            ambient_temp_c,
            object_temp_c,
            object_temp_f: c_to_f(object_temp_c),
            lead_status,
            timestamp,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn conversions() {
        assert!((c_to_f(37.0) - 98.6).abs() < 1e-12);
        assert_eq!(c_to_f(0.0), 32.0);
        assert!((c_to_f(37.78) - 100.004).abs() < 1e-9);
        assert!(c_to_f(37.78) >= 100.0);
    }

    #[test]
    fn serializes_unavailable_as_null() {
        let v = VitalsFrame::new(1.0, None, Some(98.0), 512, 25.0, 37.0, LeadStatus::Connected);
        let j = serde_json::to_value(v).unwrap();
        assert!(j["beatsPerMinute"].is_null());
        assert_eq!(j["spo2"], 98.0);
        assert_eq!(j["leadStatus"], 0);
    }

    proptest! {
        #[test]
        fn frame_fahrenheit_matches_conversion(c in -50.0f64..60.0) {
            let v = VitalsFrame::new(0.0, None, None, 0, 20.0, c, LeadStatus::Connected);
            prop_assert_eq!(v.object_temp_f, c_to_f(c));
        }
    }
}
