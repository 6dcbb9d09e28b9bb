//! Glove: gyroscope bias calibration and threshold classification of tilt
//! rates into movement commands, transmitted every cadence tick.

use std::sync::mpsc::Sender;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::command::Command;
use crate::pacing::Pacer;

pub const DEFAULT_THRESHOLD: f64 = 30.0;
pub const DEFAULT_CALIBRATION_SAMPLES: usize = 200;
pub const DEFAULT_CADENCE: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GestureError {
    #[error("calibration needs at least one sample")]
    EmptyCalibration,
    #[error("calibration sample {0} is not finite")]
    NonFiniteSample(usize),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
}

/// Angular velocity in deg/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GyroSample {
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

impl GyroSample {
    pub fn new(gx: f64, gy: f64, gz: f64) -> Self {
        Self { gx, gy, gz }
    }

    pub fn is_finite(&self) -> bool {
        self.gx.is_finite() && self.gy.is_finite() && self.gz.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOffsets {
    pub offset_x: f64,
    pub offset_y: f64,
    /// Computed for completeness; classification never reads z.
    pub offset_z: f64,
    pub sample_count: usize,
}

impl CalibrationOffsets {
    pub fn zero() -> Self {
        Self {
            offset_x: 0.0,
            offset_y: 0.0,
            offset_z: 0.0,
            sample_count: 1,
        }
    }
}

/// Comparison thresholds in deg/s. Forward and right are positive, backward
/// and left negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureThresholds {
    pub forward: f64,
    pub backward: f64,
    pub left: f64,
    pub right: f64,
}

impl Default for GestureThresholds {
    fn default() -> Self {
        Self::symmetric(DEFAULT_THRESHOLD)
    }
}

impl GestureThresholds {
    pub fn symmetric(t: f64) -> Self {
        Self {
            forward: t,
            backward: -t,
            left: -t,
            right: t,
        }
    }

    pub fn validate(&self) -> Result<(), GestureError> {
        let ok = self.forward > 0.0
            && self.right > 0.0
            && self.backward < 0.0
            && self.left < 0.0
            && [self.forward, self.backward, self.left, self.right]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(GestureError::InvalidThresholds(format!(
                "need forward > 0, right > 0, backward < 0, left < 0; got {self:?}"
            )))
        }
    }
}

/// Per-axis mean of stationary samples.
pub fn calibrate(samples: &[GyroSample]) -> Result<CalibrationOffsets, GestureError> {
    if samples.is_empty() {
        return Err(GestureError::EmptyCalibration);
    }
    if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
        return Err(GestureError::NonFiniteSample(i));
    }
    let n = samples.len() as f64;
    let (sx, sy, sz) = samples
        .iter()
        .fold((0.0, 0.0, 0.0), |(x, y, z), s| (x + s.gx, y + s.gy, z + s.gz));
    Ok(CalibrationOffsets {
        offset_x: sx / n,
        offset_y: sy / n,
        offset_z: sz / n,
        sample_count: samples.len(),
    })
}

pub fn apply_calibration(raw: &GyroSample, offsets: &CalibrationOffsets) -> GyroSample {
    GyroSample {
        gx: raw.gx - offsets.offset_x,
        gy: raw.gy - offsets.offset_y,
        gz: raw.gz - offsets.offset_z,
    }
}

/// Decision chain in fixed priority: F, B, R, L, otherwise S. Total over all
/// inputs; NaN fails every comparison and falls through to S.
pub fn classify_gesture(calibrated: &GyroSample, thresholds: &GestureThresholds) -> Command {
    let (gx, gy) = (calibrated.gx, calibrated.gy);
    if gy > thresholds.forward {
        Command::Forward
    } else if gy < thresholds.backward {
        Command::Backward
    } else if gx > thresholds.right {
        Command::Right
    } else if gx < thresholds.left {
        Command::Left
    } else {
        Command::Stop
    }
}

/// Accumulates stationary samples until the target count is reached.
#[derive(Debug, Clone)]
pub struct Calibrator {
    target: usize,
    samples: Vec<GyroSample>,
}

impl Calibrator {
    pub fn new(target: usize) -> Self {
        Self {
            target: target.max(1),
            samples: Vec::with_capacity(target),
        }
    }

    /// Returns the offsets once the last sample is in.
    pub fn push(&mut self, s: GyroSample) -> Option<Result<CalibrationOffsets, GestureError>> {
        if self.samples.len() >= self.target {
            return None;
        }
        self.samples.push(s);
        (self.samples.len() == self.target).then(|| calibrate(&self.samples))
    }

    pub fn collected(&self) -> usize {
        self.samples.len()
    }
}

/// A calibrated glove.
#[derive(Debug, Clone, Copy)]
pub struct GestureController {
    pub offsets: CalibrationOffsets,
    pub thresholds: GestureThresholds,
}

impl GestureController {
    pub fn new(offsets: CalibrationOffsets, thresholds: GestureThresholds) -> Self {
        Self { offsets, thresholds }
    }

    pub fn command_for(&self, raw: &GyroSample) -> Command {
        classify_gesture(&apply_calibration(raw, &self.offsets), &self.thresholds)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SendError {
    #[error("command channel closed")]
    Closed,
    #[error("transient send failure: {0}")]
    Transient(String),
}

/// Destination of glove frames.
pub trait CommandSink {
    fn send(&mut self, c: Command) -> Result<(), SendError>;
}

impl CommandSink for Sender<Command> {
    fn send(&mut self, c: Command) -> Result<(), SendError> {
        Sender::send(self, c).map_err(|_| SendError::Closed)
    }
}

impl CommandSink for Vec<Command> {
    fn send(&mut self, c: Command) -> Result<(), SendError> {
        self.push(c);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopExit {
    SourceExhausted,
    SinkClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopReport {
    pub ticks: u64,
    pub frames_sent: u64,
    pub send_failures: u64,
    pub exit: LoopExit,
}

/// Classify one raw sample per cadence tick and transmit the result
/// unconditionally. Transient send failures are counted and the next tick
/// proceeds; a closed sink ends the loop.
pub fn controller_loop<I, K, P>(
    controller: &GestureController,
    source: I,
    sink: &mut K,
    pacer: &mut P,
    cadence: Duration,
) -> LoopReport
where
    I: IntoIterator<Item = GyroSample>,
    K: CommandSink + ?Sized,
    P: Pacer + ?Sized,
{
    let mut report = LoopReport {
        ticks: 0,
        frames_sent: 0,
        send_failures: 0,
        exit: LoopExit::SourceExhausted,
    };
    for raw in source {
        report.ticks += 1;
        let c = controller.command_for(&raw);
        match sink.send(c) {
            Ok(()) => report.frames_sent += 1,
            Err(SendError::Transient(e)) => {
                report.send_failures += 1;
                tracing::debug!(error = %e, "glove frame not delivered, retrying next tick");
            }
            Err(SendError::Closed) => {
                report.exit = LoopExit::SinkClosed;
                tracing::info!(frames = report.frames_sent, "command sink closed, glove loop stopping");
                break;
            }
        }
        pacer.wait(cadence);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pacing::VirtualPacer;
    use crate::rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};
    use std::sync::mpsc;

    #[test]
    fn mean_of_constant_samples() {
        let s = vec![GyroSample::new(1.0, 2.0, 3.0); 17];
        let o = calibrate(&s).unwrap();
        assert_eq!((o.offset_x, o.offset_y, o.offset_z, o.sample_count), (1.0, 2.0, 3.0, 17));
    }

    #[test]
    fn two_point_mean() {
        let o = calibrate(&[GyroSample::new(0.0, 0.0, 0.0), GyroSample::new(2.0, 4.0, 6.0)]).unwrap();
        assert_eq!((o.offset_x, o.offset_y, o.offset_z), (1.0, 2.0, 3.0));
    }

    #[test]
    fn empty_calibration_is_an_error() {
        assert_eq!(calibrate(&[]), Err(GestureError::EmptyCalibration));
        assert!(matches!(
            calibrate(&[GyroSample::new(f64::NAN, 0.0, 0.0)]),
            Err(GestureError::NonFiniteSample(0))
        ));
    }

    #[test]
    fn noisy_calibration_converges_to_bias() {
        let bias = (0.5, -0.3, 0.1);
        let sigma = 0.05;
        let n = 200;
        let mut r = rng::stream(2024);
        let noise = Normal::new(0.0, sigma).unwrap();
        let samples: Vec<_> = (0..n)
            .map(|_| {
                GyroSample::new(
                    bias.0 + noise.sample(&mut r),
                    bias.1 + noise.sample(&mut r),
                    bias.2 + noise.sample(&mut r),
                )
            })
            .collect();
        let o = calibrate(&samples).unwrap();
        let bound = 3.0 * sigma / (n as f64).sqrt();
        assert!((o.offset_x - bias.0).abs() < bound);
        assert!((o.offset_y - bias.1).abs() < bound);
        assert!((o.offset_z - bias.2).abs() < bound);
    }

    #[test]
    fn calibration_subtracts() {
        let o = CalibrationOffsets { offset_x: 1.0, offset_y: 2.0, offset_z: 3.0, sample_count: 1 };
        assert_eq!(apply_calibration(&GyroSample::new(10.0, 10.0, 10.0), &o), GyroSample::new(9.0, 8.0, 7.0));
        assert_eq!(apply_calibration(&GyroSample::new(1.0, 2.0, 3.0), &o), GyroSample::default());
        let o = CalibrationOffsets { offset_x: -5.0, offset_y: 0.0, offset_z: 0.0, sample_count: 1 };
        assert_eq!(apply_calibration(&GyroSample::new(-5.0, 0.0, 0.0), &o), GyroSample::default());
    }

    #[test]
    fn classification_examples() {
        let th = GestureThresholds::default();
        assert_eq!(classify_gesture(&GyroSample::new(0.0, 0.0, 0.0), &th), Command::Stop);
        assert_eq!(classify_gesture(&GyroSample::new(0.0, 50.0, 0.0), &th), Command::Forward);
        assert_eq!(classify_gesture(&GyroSample::new(50.0, 50.0, 0.0), &th), Command::Forward);
        assert_eq!(classify_gesture(&GyroSample::new(0.0, -50.0, 0.0), &th), Command::Backward);
        assert_eq!(classify_gesture(&GyroSample::new(50.0, 0.0, 0.0), &th), Command::Right);
        assert_eq!(classify_gesture(&GyroSample::new(-50.0, 0.0, 0.0), &th), Command::Left);
        // Strict comparisons: exactly at threshold is not a gesture.
        assert_eq!(classify_gesture(&GyroSample::new(30.0, 30.0, 0.0), &th), Command::Stop);
        // z never participates.
        assert_eq!(classify_gesture(&GyroSample::new(0.0, 0.0, 500.0), &th), Command::Stop);
    }

    #[test]
    fn thresholds_validation() {
        assert!(GestureThresholds::default().validate().is_ok());
        let bad = GestureThresholds { backward: 5.0, ..GestureThresholds::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn calibrator_completes_at_target() {
        let mut c = Calibrator::new(3);
        assert!(c.push(GyroSample::new(1.0, 0.0, 0.0)).is_none());
        assert!(c.push(GyroSample::new(2.0, 0.0, 0.0)).is_none());
        let o = c.push(GyroSample::new(3.0, 0.0, 0.0)).unwrap().unwrap();
        assert_eq!(o.offset_x, 2.0);
        assert!(c.push(GyroSample::default()).is_none());
    }

    #[test]
    fn one_second_of_forward_sends_ten_frames() {
        let ctl = GestureController::new(CalibrationOffsets::zero(), GestureThresholds::default());
        let mut sink = Vec::new();
        let mut pacer = VirtualPacer::new();
        let source = std::iter::repeat_n(GyroSample::new(0.0, 45.0, 0.0), 10);
        let report = controller_loop(&ctl, source, &mut sink, &mut pacer, DEFAULT_CADENCE);
        assert_eq!(sink, vec![Command::Forward; 10]);
        assert_eq!(report.frames_sent, 10);
        assert_eq!(pacer.elapsed(), Duration::from_secs(1));
    }

    #[test]
    fn stationary_stream_sends_stop_every_tick() {
        let ctl = GestureController::new(CalibrationOffsets::zero(), GestureThresholds::default());
        let mut sink = Vec::new();
        let source = std::iter::repeat_n(GyroSample::default(), 25);
        controller_loop(&ctl, source, &mut sink, &mut VirtualPacer::new(), DEFAULT_CADENCE);
        assert_eq!(sink, vec![Command::Stop; 25]);
    }

    #[test]
    fn closed_sink_stops_loop_cleanly() {
        let ctl = GestureController::new(CalibrationOffsets::zero(), GestureThresholds::default());
        let (mut tx, rx) = mpsc::channel();
        let first = std::iter::repeat_n(GyroSample::default(), 4);
        let r1 = controller_loop(&ctl, first, &mut tx, &mut VirtualPacer::new(), DEFAULT_CADENCE);
        assert_eq!(r1.frames_sent, 4);
        assert_eq!(rx.try_iter().count(), 4);
        drop(rx);
        let rest = std::iter::repeat_n(GyroSample::default(), 96);
        let r2 = controller_loop(&ctl, rest, &mut tx, &mut VirtualPacer::new(), DEFAULT_CADENCE);
        assert_eq!(r2.exit, LoopExit::SinkClosed);
        assert_eq!((r2.ticks, r2.frames_sent), (1, 0));
    }

    struct Flaky {
        calls: u32,
        sent: Vec<Command>,
    }

    impl CommandSink for Flaky {
        fn send(&mut self, c: Command) -> Result<(), SendError> {
            self.calls += 1;
            if self.calls.is_multiple_of(3) {
                Err(SendError::Transient("radio busy".into()))
            } else {
                self.sent.push(c);
                Ok(())
            }
        }
    }

    #[test]
    fn transient_failures_do_not_block_later_ticks() {
        let ctl = GestureController::new(CalibrationOffsets::zero(), GestureThresholds::default());
        let mut sink = Flaky { calls: 0, sent: vec![] };
        let source = std::iter::repeat_n(GyroSample::new(-45.0, 0.0, 0.0), 9);
        let report = controller_loop(&ctl, source, &mut sink, &mut VirtualPacer::new(), DEFAULT_CADENCE);
        assert_eq!(report.ticks, 9);
        assert_eq!(report.send_failures, 3);
        assert_eq!(sink.sent.len(), 6);
        assert_eq!(report.exit, LoopExit::SourceExhausted);
    }

    /// Independent reference for the priority order.
    fn reference_chain(gx: f64, gy: f64, t: &GestureThresholds) -> Command {
        let branches = [
            (gy > t.forward, Command::Forward),
            (gy < t.backward, Command::Backward),
            (gx > t.right, Command::Right),
            (gx < t.left, Command::Left),
        ];
        branches
            .iter()
            .find(|(hit, _)| *hit)
            .map(|(_, c)| *c)
            .unwrap_or(Command::Stop)
    }

    proptest! {
        #[test]
        fn classification_is_total(gx in any::<f64>(), gy in any::<f64>(), gz in any::<f64>()) {
            let c = classify_gesture(&GyroSample::new(gx, gy, gz), &GestureThresholds::default());
            prop_assert!(Command::ALL.contains(&c));
        }

        #[test]
        fn priority_matches_reference(
            gx in -200.0f64..200.0, gy in -200.0f64..200.0,
            f in 1.0f64..80.0, b in 1.0f64..80.0, l in 1.0f64..80.0, r in 1.0f64..80.0,
        ) {
            let t = GestureThresholds { forward: f, backward: -b, left: -l, right: r };
            prop_assert_eq!(classify_gesture(&GyroSample::new(gx, gy, 0.0), &t), reference_chain(gx, gy, &t));
        }

        #[test]
        fn constant_input_calibrates_to_stop(
            x in -1e3f64..1e3, y in -1e3f64..1e3, z in -1e3f64..1e3, n in 1usize..50, t in 0.1f64..100.0
        ) {
            let s = GyroSample::new(x, y, z);
            let o = calibrate(&vec![s; n]).unwrap();
            let th = GestureThresholds::symmetric(t);
            prop_assert_eq!(classify_gesture(&apply_calibration(&s, &o), &th), Command::Stop);
        }
    }
}
