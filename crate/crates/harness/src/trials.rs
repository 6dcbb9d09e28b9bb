//! Monte Carlo trials: gesture classification, obstacle stops, detection
//! metrics and randomized safety runs. Every report keeps its per-trial
//! records so aggregate rates can be recomputed from raw outcomes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use wheelsim_core::base::{base_tick, BaseState, MotorState, OverrideScope, DEFAULT_SAFETY_THRESHOLD_CM};
use wheelsim_core::gesture::{
    calibrate, GestureController, GestureThresholds, GyroSample, DEFAULT_CALIBRATION_SAMPLES,
};
use wheelsim_core::perception::{
    filter_detections, score_detections, simulate_detections, synthetic_frame, DetectorParams, Metrics,
    DEFAULT_IOU_THRESHOLD,
};
use wheelsim_core::rng::substream;
use wheelsim_core::world::{
    measure_ultrasonic, raycast, synth_gyro, ChairParams, GestureStep, Obstacle, Pose, UltrasonicModel, UserProfile,
    WorldState,
};
use wheelsim_core::Command;

pub const GESTURE_DEFINITION: &str = "success: every classification during the 1 s hold (10 samples at 100 ms, \
after 200-sample calibration at rest) equals the scripted gesture";
pub const OBSTACLE_DEFINITION: &str = "success: the chair, driven forward at a wall, stops with true standoff \
in (0, 20] cm; contact or timeout is a failure";
pub const DETECTION_DEFINITION: &str = "detections filtered at the confidence threshold, matched to truth by \
same-label IoU >= 0.5 in descending confidence";

/// Gestures evaluated in the trial table, in table order.
pub const TRIAL_GESTURES: [Command; 4] = [Command::Forward, Command::Backward, Command::Left, Command::Right];

/// Sensor noise and user failure model for gesture trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// deg/s
    pub gyro_noise_sigma: f64,
    /// deg/s
    pub gyro_bias: [f64; 3],
    /// Per-gesture probability that a trial is performed too weakly to cross
    /// the threshold. A weak tilt is drawn from U(0, threshold / 2).
    pub weak_gesture_probability: BTreeMap<Command, f64>,
    /// deg/s
    pub tilt: f64,
    pub hold_samples: usize,
    pub cadence_s: f64,
    pub calibration_samples: usize,
    pub thresholds: GestureThresholds,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            gyro_noise_sigma: 0.0,
            gyro_bias: [0.0; 3],
            weak_gesture_probability: BTreeMap::new(),
            tilt: 45.0,
            hold_samples: 10,
            cadence_s: 0.1,
            calibration_samples: DEFAULT_CALIBRATION_SAMPLES,
            thresholds: GestureThresholds::default(),
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self::default()
    }

    /// Sensor noise plus per-gesture weak-gesture rates of 4, 2, 7 and 5 %
    /// for F, B, L and R.
    pub fn reference() -> Self {
        Self {
            gyro_noise_sigma: 2.0,
            gyro_bias: [1.5, -2.0, 0.5],
            weak_gesture_probability: [
                (Command::Forward, 0.04),
                (Command::Backward, 0.02),
                (Command::Left, 0.07),
                (Command::Right, 0.05),
            ]
            .into_iter()
            .collect(),
            ..Self::default()
        }
    }

    /// Threshold magnitude for a gesture's axis.
    fn threshold_for(&self, g: Command) -> f64 {
        let t = match g {
            Command::Forward => self.thresholds.forward,
            Command::Backward => self.thresholds.backward,
            Command::Left => self.thresholds.left,
            Command::Right => self.thresholds.right,
            Command::Stop => 0.0,
        };
        t.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub label: String,
    pub trials: u64,
    pub successes: u64,
    pub failures: u64,
    pub success_rate: f64,
}

impl TrialRow {
    pub fn new(label: impl Into<String>, trials: u64, successes: u64) -> Self {
        let success_rate = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        Self { label: label.into(), trials, successes, failures: trials - successes, success_rate }
    }
}

/// Per-row and total outcomes with the raw per-trial records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport<R> {
    pub experiment: String,
    pub definition: String,
    pub seed: u64,
    pub rows: Vec<TrialRow>,
    pub total: TrialRow,
    pub records: Vec<R>,
}

impl<R> TrialReport<R> {
    fn from_rows(experiment: &str, definition: &str, seed: u64, rows: Vec<TrialRow>, records: Vec<R>) -> Self {
        let trials = rows.iter().map(|r| r.trials).sum();
        let successes = rows.iter().map(|r| r.successes).sum();
        Self {
            experiment: experiment.into(),
            definition: definition.into(),
            seed,
            rows,
            total: TrialRow::new("Total", trials, successes),
            records,
        }
    }

    /// Fixed-width table with the success definition as its header.
    pub fn render_table(&self, label_heading: &str) -> String {
        let mut out = format!("# {}\n# {}\n", self.experiment, self.definition);
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>10} {:>9} {:>13}",
            label_heading, "Trials", "Successes", "Failures", "Success Rate"
        );
        for r in self.rows.iter().chain(std::iter::once(&self.total)) {
            let _ = writeln!(
                out,
                "{:<10} {:>8} {:>10} {:>9} {:>12.2}%",
                r.label,
                r.trials,
                r.successes,
                r.failures,
                100.0 * r.success_rate
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureTrialRecord {
    pub gesture: Command,
    pub trial: u64,
    pub weak: bool,
    pub tilt: f64,
    /// One symbol per hold sample.
    pub classifications: String,
    pub success: bool,
}

fn gesture_name(c: Command) -> &'static str {
    match c {
        Command::Forward => "Forward",
        Command::Backward => "Backward",
        Command::Left => "Left",
        Command::Right => "Right",
        Command::Stop => "Stop",
    }
}

/// One scripted execution: rest during calibration, then hold `gesture`.
pub fn run_gesture_trial(
    gesture: Command,
    trial: u64,
    noise: &NoiseConfig,
    rng: &mut wheelsim_core::rng::RandomStream,
) -> GestureTrialRecord {
    let p_weak = noise.weak_gesture_probability.get(&gesture).copied().unwrap_or(0.0);
    let weak = p_weak > 0.0 && rng.random::<f64>() < p_weak;
    let tilt = if weak { rng.random_range(0.0..0.5 * noise.threshold_for(gesture)) } else { noise.tilt };

    let cal_period = 0.01;
    let cal_s = noise.calibration_samples as f64 * cal_period;
    let hold_s = noise.hold_samples as f64 * noise.cadence_s;
    let user = UserProfile {
        gesture_script: vec![
            GestureStep { gesture: Command::Stop, duration: cal_s, tilt: 0.0 },
            GestureStep { gesture, duration: hold_s, tilt },
        ],
        gyro_bias: noise.gyro_bias,
        gyro_noise_sigma: noise.gyro_noise_sigma,
        ..UserProfile::default()
    };
    let rest: Vec<GyroSample> = (0..noise.calibration_samples)
        .map(|i| synth_gyro(&user, i as f64 * cal_period, rng))
        .collect();
    let offsets = calibrate(&rest).expect("finite rest samples");
    let ctl = GestureController::new(offsets, noise.thresholds);
    let classifications: String = (0..noise.hold_samples)
        .map(|j| ctl.command_for(&synth_gyro(&user, cal_s + j as f64 * noise.cadence_s, rng)).symbol())
        .collect();
    let success = classifications.chars().all(|c| c == gesture.symbol());
    GestureTrialRecord { gesture, trial, weak, tilt, classifications, success }
}

pub fn run_gesture_trials(n_per_gesture: u64, noise: &NoiseConfig, seed: u64) -> TrialReport<GestureTrialRecord> {
    let mut rng = substream(seed, "gesture-trials");
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for g in TRIAL_GESTURES {
        let mut ok = 0;
        for trial in 0..n_per_gesture {
            let r = run_gesture_trial(g, trial, noise, &mut rng);
            ok += u64::from(r.success);
            records.push(r);
        }
        rows.push(TrialRow::new(gesture_name(g), n_per_gesture, ok));
    }
    TrialReport::from_rows("gesture", GESTURE_DEFINITION, seed, rows, records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObstacleTrialConfig {
    pub model: UltrasonicModel,
    /// m/s
    pub speed: f64,
    /// Initial distance to the wall, drawn uniformly from this range (m).
    pub wall_distance_m: (f64, f64),
    pub base_tick_ms: u64,
    pub glove_cadence_ms: u64,
    pub timeout_s: f64,
}

impl Default for ObstacleTrialConfig {
    fn default() -> Self {
        Self {
            model: UltrasonicModel::default(),
            speed: 2.0,
            wall_distance_m: (1.0, 1.2),
            base_tick_ms: 100,
            glove_cadence_ms: 100,
            timeout_s: 3.0,
        }
    }
}

impl ObstacleTrialConfig {
    pub fn with_miss(miss_probability: f64) -> Self {
        let mut c = Self::default();
        c.model.miss_probability = miss_probability;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleOutcome {
    Stopped,
    Contact,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleTrialRecord {
    pub trial: u64,
    pub wall_distance_m: f64,
    pub outcome: ObstacleOutcome,
    /// True distance to the wall when the trial ended (cm).
    pub standoff_cm: Option<f64>,
    /// Readings taken at base ticks (cm).
    pub readings_cm: Vec<f64>,
    pub success: bool,
}

/// Drive at a wall with the glove holding Forward until the override stops
/// the chair, contact occurs or the timeout passes.
pub fn run_obstacle_trial(
    trial: u64,
    cfg: &ObstacleTrialConfig,
    rng: &mut wheelsim_core::rng::RandomStream,
) -> ObstacleTrialRecord {
    let (lo, hi) = cfg.wall_distance_m;
    let d0 = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let wall = Obstacle::segment("wall", [d0, -2.0], [d0, 2.0]);
    let chair = ChairParams { linear_speed: cfg.speed, ..ChairParams::default() };
    let mut world = WorldState::new(Pose::default(), chair, vec![wall], Vec::new(), trial).expect("valid world");
    let mut base = BaseState::new(DEFAULT_SAFETY_THRESHOLD_CM, OverrideScope::All);
    let mut pending = None;
    let mut readings = Vec::new();
    let ticks = (cfg.timeout_s * 100.0).round() as u64;
    let true_cm = |w: &WorldState| raycast(&w.chair_pose, &w.obstacles).map(|m| m * 100.0);
    for k in 1..=ticks {
        let t_ms = k * 10;
        world.step(base.motor, 0.01);
        let d_true = true_cm(&world);
        if d_true.is_none_or(|d| d <= 0.0) {
            return ObstacleTrialRecord {
                trial,
                wall_distance_m: d0,
                outcome: ObstacleOutcome::Contact,
                standoff_cm: Some(d_true.unwrap_or(0.0).min(0.0)),
                readings_cm: readings,
                success: false,
            };
        }
        if t_ms % cfg.glove_cadence_ms == 0 {
            pending = Some(Command::Forward);
        }
        if t_ms % cfg.base_tick_ms == 0 {
            let d = measure_ultrasonic(&world, &cfg.model, rng);
            readings.push(d);
            base = base_tick(&base, pending.take(), d);
            if base.override_active {
                let standoff = d_true.expect("checked above");
                return ObstacleTrialRecord {
                    trial,
                    wall_distance_m: d0,
                    outcome: ObstacleOutcome::Stopped,
                    standoff_cm: Some(standoff),
                    readings_cm: readings,
                    success: standoff > 0.0 && standoff <= DEFAULT_SAFETY_THRESHOLD_CM,
                };
            }
        }
    }
    ObstacleTrialRecord {
        trial,
        wall_distance_m: d0,
        outcome: ObstacleOutcome::Timeout,
        standoff_cm: true_cm(&world),
        readings_cm: readings,
        success: false,
    }
}

pub fn run_obstacle_trials(n: u64, cfg: &ObstacleTrialConfig, seed: u64) -> TrialReport<ObstacleTrialRecord> {
    let mut rng = substream(seed, "obstacle-trials");
    let records: Vec<_> = (0..n).map(|i| run_obstacle_trial(i, cfg, &mut rng)).collect();
    let ok = records.iter().filter(|r| r.success).count() as u64;
    TrialReport::from_rows("obstacle", OBSTACLE_DEFINITION, seed, vec![TrialRow::new("Stop", n, ok)], records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub definition: String,
    pub frames: u64,
    pub objects_per_frame: usize,
    pub confidence_threshold: f64,
    pub seed: u64,
    pub metrics: Metrics,
}

impl DetectionReport {
    pub fn render_table(&self) -> String {
        let m = &self.metrics;
        format!(
            "# detection\n# {}\n{:<10} {:>8} {:>8} {:>8} {:>10} {:>8} {:>8}\n{:<10} {:>8} {:>8} {:>8} {:>9.2}% {:>7.2}% {:>7.2}%\n",
            self.definition,
            "Frames", "TP", "FP", "FN", "Precision", "Recall", "F1",
            self.frames, m.tp, m.fp, m.fn_, 100.0 * m.precision, 100.0 * m.recall, 100.0 * m.f1
        )
    }
}

/// Synthetic scenes through simulate, filter and score, pooled over frames.
pub fn run_detection_eval(
    frames: u64,
    objects_per_frame: usize,
    params: &DetectorParams,
    threshold: f64,
    seed: u64,
) -> DetectionReport {
    let mut scene_rng = substream(seed, "scenes");
    let mut det_rng = substream(seed, "detector");
    let mut metrics = Metrics::from_counts(0, 0, 0, Default::default());
    for f in 0..frames {
        let frame = synthetic_frame(f, objects_per_frame, &mut scene_rng);
        let dets = simulate_detections(&frame.truth, params, f, &mut det_rng);
        let kept = filter_detections(&dets, threshold);
        metrics = metrics.merge(&score_detections(&kept, &frame.truth, DEFAULT_IOU_THRESHOLD));
    }
    DetectionReport {
        definition: DETECTION_DEFINITION.into(),
        frames,
        objects_per_frame,
        confidence_threshold: threshold,
        seed,
        metrics,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyTick {
    pub t_ms: u64,
    pub measured_cm: f64,
    pub motor: MotorState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyOutcome {
    pub seed: u64,
    pub obstacles: usize,
    pub base_ticks: u64,
    pub overrides: u64,
    /// Base ticks ending with the motor running while the tick's reading was
    /// within the safety threshold.
    pub violations: Vec<SafetyTick>,
}

pub const SAFETY_DURATION_S: f64 = 20.0;

/// Random obstacle field, random command trace and a noisy, lossy sensor,
/// run through the world and base for [`SAFETY_DURATION_S`].
pub fn run_safety_scenario(seed: u64) -> SafetyOutcome {
    let mut rng = substream(seed, "safety");
    let n_obstacles = rng.random_range(3..=10);
    let mut obstacles: Vec<Obstacle> = (0..n_obstacles)
        .map(|i| {
            // Keep the start pose clear.
            let r = rng.random_range(1.0..4.0);
            let a = rng.random_range(-PI..PI);
            Obstacle::circle(format!("c{i}"), [r * a.cos(), r * a.sin()], rng.random_range(0.1..0.6))
        })
        .collect();
    for (i, (from, to)) in [
        ([-5.0, -5.0], [5.0, -5.0]),
        ([5.0, -5.0], [5.0, 5.0]),
        ([5.0, 5.0], [-5.0, 5.0]),
        ([-5.0, 5.0], [-5.0, -5.0]),
    ]
    .into_iter()
    .enumerate()
    {
        obstacles.push(Obstacle::segment(format!("w{i}"), from, to));
    }
    let chair = ChairParams { linear_speed: rng.random_range(0.2..2.0), angular_speed: rng.random_range(0.3..2.0) };
    let model = UltrasonicModel {
        max_range_cm: 400.0,
        noise_sigma_cm: rng.random_range(0.0..3.0),
        miss_probability: rng.random_range(0.0..0.1),
    };
    let pose = Pose::new(0.0, 0.0, rng.random_range(-PI..PI));
    let mut world = WorldState::new(pose, chair, obstacles, Vec::new(), seed).expect("valid world");
    let mut base = BaseState::new(DEFAULT_SAFETY_THRESHOLD_CM, OverrideScope::All);
    let mut out = SafetyOutcome { seed, obstacles: world.obstacles.len(), base_ticks: 0, overrides: 0, violations: Vec::new() };
    let mut pending = None;
    let ticks = (SAFETY_DURATION_S * 100.0) as u64;
    for k in 1..=ticks {
        let t_ms = k * 10;
        world.step(base.motor, 0.01);
        if t_ms % 100 == 0 {
            // Fresh random command on some cadence ticks; silence otherwise.
            if rng.random::<f64>() < 0.4 {
                pending = Some(Command::ALL[rng.random_range(0..Command::ALL.len())]);
            }
            let d = measure_ultrasonic(&world, &model, &mut rng);
            base = base_tick(&base, pending.take(), d);
            out.base_ticks += 1;
            out.overrides += u64::from(base.override_active);
            if base.motor != MotorState::Stop && d <= DEFAULT_SAFETY_THRESHOLD_CM {
                out.violations.push(SafetyTick { t_ms, measured_cm: d, motor: base.motor });
            }
        }
    }
    out
}
