//! Health monitor: serial frame ingestion, heart rate and SpO2 from PPG
//! windows, temperature conversion, alert latches and upload scheduling.

mod alert;
mod monitor;
mod ppg;
mod vitals;

pub use alert::{alert_gate, spo2_gate, temperature_gate, AlertEvent, AlertParameter, AlertState};
pub use monitor::{
    monitor_loop, upload_tick, CloudPayload, HealthMonitor, IterationOutput, MonitorConfig, MonitorReport,
    DEFAULT_LOOP_PERIOD, DEFAULT_UPLOAD_INTERVAL_S,
};
pub use ppg::{compute_bpm, compute_spo2, PpgWindow, DEFAULT_SAMPLE_RATE_HZ, DEFAULT_WINDOW_S};
pub use vitals::{c_to_f, VitalsFrame};

/// Linear ratio-of-ratios mapping, clamped to [0, 100].
pub fn spo2_from_ratio(r: f64) -> f64 {
    (110.0 - 25.0 * r).clamp(0.0, 100.0)
}

/// Inverse of [`spo2_from_ratio`] on its unclamped range.
pub fn ratio_for_spo2(spo2: f64) -> f64 {
    (110.0 - spo2) / 25.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_examples() {
        assert!((spo2_from_ratio(0.48) - 98.0).abs() < 1e-12);
        assert_eq!(spo2_from_ratio(0.4), 100.0);
        assert_eq!(spo2_from_ratio(0.2), 100.0);
        assert_eq!(spo2_from_ratio(10.0), 0.0);
    }

    #[test]
    fn inverse_round_trips() {
        for s in [0.0, 50.0, 90.0, 95.0, 98.0, 100.0] {
            assert!((spo2_from_ratio(ratio_for_spo2(s)) - s).abs() < 1e-12);
        }
    }
}
