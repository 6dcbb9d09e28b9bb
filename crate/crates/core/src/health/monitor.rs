use std::sync::mpsc::{Receiver, Sender, TryRecvError};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::alert::{spo2_gate, temperature_gate, AlertEvent, AlertParameter, AlertState};
use super::ppg::{compute_bpm, compute_spo2, PpgWindow, DEFAULT_SAMPLE_RATE_HZ, DEFAULT_WINDOW_S};
use super::vitals::VitalsFrame;
use crate::hub::{byte_budget, parse_sensor_frame, LineAssembler, SerialReader, DEFAULT_BAUD};
use crate::pacing::Pacer;
use crate::world::{EcgTempSample, PpgSample};

pub const DEFAULT_LOOP_PERIOD: Duration = Duration::from_millis(10);
pub const DEFAULT_UPLOAD_INTERVAL_S: f64 = 10.0;
/// Slack on the upload comparison so accumulated float time never skips a slot.
const UPLOAD_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig {
    pub loop_period_ms: u64,
    pub upload_interval_s: f64,
    pub ppg_window_s: f64,
    pub ppg_sample_rate_hz: f64,
    pub temp_threshold_f: f64,
    pub spo2_floor: f64,
    pub serial_baud: u32,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            loop_period_ms: DEFAULT_LOOP_PERIOD.as_millis() as u64,
            upload_interval_s: DEFAULT_UPLOAD_INTERVAL_S,
            ppg_window_s: DEFAULT_WINDOW_S,
            ppg_sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            temp_threshold_f: 100.0,
            spo2_floor: 90.0,
            serial_baud: DEFAULT_BAUD,
        }
    }
}

impl MonitorConfig {
    pub fn loop_period(&self) -> Duration {
        Duration::from_millis(self.loop_period_ms)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.loop_period_ms == 0 {
            return Err("loop_period_ms must be positive".into());
        }
        if !(self.upload_interval_s > 0.0) || !(self.ppg_window_s > 0.0) || !(self.ppg_sample_rate_hz > 0.0) {
            return Err("upload interval, PPG window and sample rate must be positive".into());
        }
        if !self.temp_threshold_f.is_finite() || !(0.0..=100.0).contains(&self.spo2_floor) {
            return Err("alert thresholds out of range".into());
        }
        if self.serial_baud == 0 {
            return Err("serial_baud must be positive".into());
        }
        Ok(())
    }
}

/// Snapshot scheduled for the cloud channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CloudPayload {
    pub beats_per_minute: Option<f64>,
    pub spo2: Option<f64>,
    pub ecg_value: i32,
    pub object_temp_f: f64,
    pub ambient_temp_c: f64,
    pub lead_status: u8,
    pub timestamp: f64,
}

impl From<&VitalsFrame> for CloudPayload {
    fn from(v: &VitalsFrame) -> Self {
        Self {
            beats_per_minute: v.beats_per_minute,
            spo2: v.spo2,
            ecg_value: v.ecg_value,
            object_temp_f: v.object_temp_f,
            ambient_temp_c: v.ambient_temp_c,
            lead_status: v.lead_status.code(),
            timestamp: v.timestamp,
        }
    }
}

/// Emit a payload once `interval_s` has elapsed since `last_upload`.
/// Returns the updated last-upload time.
pub fn upload_tick(last_upload: f64, now: f64, vitals: &VitalsFrame, interval_s: f64) -> (f64, Option<CloudPayload>) {
    if now - last_upload >= interval_s - UPLOAD_EPS {
        (now, Some(CloudPayload::from(vitals)))
    } else {
        (last_upload, None)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationOutput {
    pub vitals: Option<VitalsFrame>,
    pub frames_parsed: usize,
    pub frames_malformed: usize,
    pub alerts: Vec<AlertEvent>,
    pub upload: Option<CloudPayload>,
}

/// One monitor instance. [`HealthMonitor::iterate`] is a single loop
/// iteration over whatever input arrived since the previous one.
#[derive(Debug, Clone)]
pub struct HealthMonitor {
    config: MonitorConfig,
    window: PpgWindow,
    assembler: LineAssembler,
    latest_serial: Option<EcgTempSample>,
    latest_vitals: Option<VitalsFrame>,
    alert: AlertState,
    last_upload: f64,
    data_since_upload: bool,
    pub frames_parsed: u64,
    pub frames_malformed: u64,
}

impl HealthMonitor {
    pub fn new(config: MonitorConfig) -> Self {
        Self {
            window: PpgWindow::new(config.ppg_window_s, config.ppg_sample_rate_hz),
            assembler: LineAssembler::new(),
            latest_serial: None,
            latest_vitals: None,
            alert: AlertState {
                threshold_f: config.temp_threshold_f,
                spo2_floor: config.spo2_floor,
                ..AlertState::default()
            },
            last_upload: 0.0,
            data_since_upload: false,
            frames_parsed: 0,
            frames_malformed: 0,
            config,
        }
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn alert_state(&self) -> &AlertState {
        &self.alert
    }

    pub fn latest_vitals(&self) -> Option<&VitalsFrame> {
        self.latest_vitals.as_ref()
    }

    /// Ingest PPG samples and serial bytes, recompute vitals, run the alert
    /// latches and the upload schedule. The temperature latch is evaluated on
    /// each newly parsed serial frame; the SpO2 latch on every iteration.
    pub fn iterate<I>(&mut self, now: f64, ppg: I, serial_bytes: &[u8]) -> IterationOutput
    where
        I: IntoIterator<Item = PpgSample>,
    {
        let mut out = IterationOutput::default();
        for s in ppg {
            self.window.push(s);
            self.data_since_upload = true;
        }
        let mut new_frames = Vec::new();
        for line in self.assembler.push(serial_bytes) {
            match parse_sensor_frame(&line) {
                Ok(r) => {
                    out.frames_parsed += 1;
                    new_frames.push(r);
                }
                Err(e) => {
                    out.frames_malformed += 1;
                    tracing::debug!(error = %e, "dropping serial frame");
                }
            }
        }
        self.frames_parsed += out.frames_parsed as u64;
        self.frames_malformed += out.frames_malformed as u64;

        let bpm = compute_bpm(&self.window);
        let spo2 = compute_spo2(&self.window);
        let vitals_for = |r: &EcgTempSample| {
            VitalsFrame::new(now, bpm, spo2, r.ecg_value, r.ambient_temp_c, r.object_temp_c, r.lead_status)
        };
        for r in &new_frames {
            self.latest_serial = Some(*r);
            self.data_since_upload = true;
            let v = vitals_for(r);
            let (next, fired) = temperature_gate(&self.alert, v.object_temp_f);
            self.alert = next;
            if fired {
                out.alerts.push(AlertEvent {
                    timestamp: now,
                    parameter: AlertParameter::ObjectTempF,
                    value: v.object_temp_f,
                    threshold: self.alert.threshold_f,
                    vitals: v,
                });
            }
        }
        let Some(serial) = self.latest_serial else {
            // Nothing to report until the hub has spoken once.
            return out;
        };
        let vitals = vitals_for(&serial);
        let (next, fired) = spo2_gate(&self.alert, vitals.spo2);
        self.alert = next;
        if fired {
            out.alerts.push(AlertEvent {
                timestamp: now,
                parameter: AlertParameter::Spo2,
                value: vitals.spo2.unwrap_or_default(),
                threshold: self.alert.spo2_floor,
                vitals,
            });
        }
        let (last, upload) = upload_tick(self.last_upload, now, &vitals, self.config.upload_interval_s);
        self.last_upload = last;
        if upload.is_some() {
            self.data_since_upload = false;
        }
        out.upload = upload;
        out.vitals = Some(vitals);
        self.latest_vitals = Some(vitals);
        out
    }

    /// Pending payload on shutdown: the latest vitals if anything arrived
    /// since the last upload.
    pub fn flush(&mut self) -> Option<CloudPayload> {
        if !self.data_since_upload {
            return None;
        }
        self.data_since_upload = false;
        self.latest_vitals.as_ref().map(CloudPayload::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MonitorReport {
    pub iterations: u64,
    pub frames_parsed: u64,
    pub frames_malformed: u64,
    pub alerts: u64,
    pub uploads: u64,
    pub flushed: bool,
}

/// Run the monitor over channels until both inputs close, then flush.
/// Alert and cloud sends are fire-and-forget.
pub fn monitor_loop<P: Pacer + ?Sized>(
    monitor: &mut HealthMonitor,
    serial: &mut SerialReader,
    ppg: &Receiver<PpgSample>,
    alerts: &Sender<AlertEvent>,
    cloud: &Sender<CloudPayload>,
    pacer: &mut P,
) -> MonitorReport {
    let period = monitor.config.loop_period();
    let budget = byte_budget(monitor.config.serial_baud, period);
    let mut report = MonitorReport::default();
    let mut serial_open = true;
    let mut ppg_open = true;
    while serial_open || ppg_open {
        pacer.wait(period);
        let now = pacer.elapsed().as_secs_f64();
        let mut samples = Vec::new();
        while ppg_open {
            match ppg.try_recv() {
                Ok(s) => samples.push(s),
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => ppg_open = false,
            }
        }
        let bytes = if serial_open {
            serial.read_chunk(budget).unwrap_or_else(|_| {
                serial_open = false;
                Vec::new()
            })
        } else {
            Vec::new()
        };
        let out = monitor.iterate(now, samples, &bytes);
        report.iterations += 1;
        for a in out.alerts {
            report.alerts += 1;
            let _ = alerts.send(a);
        }
        if let Some(p) = out.upload {
            report.uploads += 1;
            let _ = cloud.send(p);
        }
    }
    if let Some(p) = monitor.flush() {
        report.uploads += 1;
        report.flushed = true;
        let _ = cloud.send(p);
    }
    report.frames_parsed = monitor.frames_parsed;
    report.frames_malformed = monitor.frames_malformed;
    tracing::info!(?report, "monitor loop stopped");
    report
}
