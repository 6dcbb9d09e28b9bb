//! Synthetic body signals for the scripted user: glove tilt rates, PPG
//! channels, ECG samples and skin temperature.

use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::command::Command;
use crate::gesture::GyroSample;
use crate::health::ratio_for_spo2;
use crate::rng::RandomStream;

/// IR channel DC level in ADC counts.
pub const PPG_DC_IR: f64 = 50_000.0;
/// Red channel DC level in ADC counts.
pub const PPG_DC_RED: f64 = 30_000.0;
/// AC/DC ratio of the IR channel.
pub const PPG_PERFUSION_IR: f64 = 0.02;

/// Relative weight of the second harmonic in the pulse shape. Small enough
/// that each beat has a single local maximum.
const PULSE_HARMONIC: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureStep {
    pub gesture: Command,
    /// Seconds the gesture is held.
    pub duration: f64,
    /// Sustained tilt rate in deg/s.
    #[serde(default = "default_tilt")]
    pub tilt: f64,
}

fn default_tilt() -> f64 {
    45.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TempProfile {
    Constant(f64),
    Ramp {
        from_c: f64,
        to_c: f64,
        start_s: f64,
        end_s: f64,
    },
    /// Piecewise-linear through `(time s, temp C)` points, held flat outside.
    Points(Vec<(f64, f64)>),
}

impl TempProfile {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            TempProfile::Constant(c) => *c,
            TempProfile::Ramp {
                from_c,
                to_c,
                start_s,
                end_s,
            } => {
                if t <= *start_s {
                    *from_c
                } else if t >= *end_s {
                    *to_c
                } else {
                    from_c + (to_c - from_c) * (t - start_s) / (end_s - start_s)
                }
            }
            TempProfile::Points(points) => {
                let Some(first) = points.first() else {
                    return f64::NAN;
                };
                if t <= first.0 {
                    return first.1;
                }
                for w in points.windows(2) {
                    let ((t0, c0), (t1, c1)) = (w[0], w[1]);
                    if t <= t1 {
                        return c0 + (c1 - c0) * (t - t0) / (t1 - t0);
                    }
                }
                points.last().map(|p| p.1).unwrap_or(f64::NAN)
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            TempProfile::Constant(c) if !c.is_finite() => Err("body temperature must be finite".into()),
            TempProfile::Ramp { from_c, to_c, start_s, end_s } => {
                if ![from_c, to_c, start_s, end_s].iter().all(|v| v.is_finite()) || end_s <= start_s {
                    Err("temperature ramp needs finite values and end_s > start_s".into())
                } else {
                    Ok(())
                }
            }
            TempProfile::Points(p) => {
                if p.is_empty() || p.windows(2).any(|w| w[1].0 <= w[0].0) {
                    Err("temperature points must be non-empty with increasing times".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EcgTemplate {
    pub baseline: f64,
    /// R-wave height above baseline, in ADC counts.
    pub amplitude: f64,
}

impl Default for EcgTemplate {
    fn default() -> Self {
        Self {
            baseline: 512.0,
            amplitude: 300.0,
        }
    }
}

impl EcgTemplate {
    /// Sample at `phase` in [0, 1) of the cardiac cycle: P, Q, R, S and T
    /// waves as Gaussian bumps.
    fn sample(&self, phase: f64) -> f64 {
        const WAVES: [(f64, f64, f64); 5] = [
            (0.20, 0.12, 0.025),
            (0.36, -0.10, 0.010),
            (0.40, 1.00, 0.012),
            (0.44, -0.20, 0.010),
            (0.65, 0.25, 0.040),
        ];
        let shape: f64 = WAVES
            .iter()
            .map(|(center, height, width)| height * (-0.5 * ((phase - center) / width).powi(2)).exp())
            .sum();
        self.baseline + self.amplitude * shape
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum LeadStatus {
    #[default]
    Connected,
    Off,
}

impl LeadStatus {
    pub fn code(self) -> u8 {
        match self {
            LeadStatus::Connected => 0,
            LeadStatus::Off => 1,
        }
    }
}

impl TryFrom<u8> for LeadStatus {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(LeadStatus::Connected),
            1 => Ok(LeadStatus::Off),
            other => Err(format!("lead status must be 0 or 1, got {other}")),
        }
    }
}

impl From<LeadStatus> for u8 {
    fn from(l: LeadStatus) -> u8 {
        l.code()
    }
}

/// The scripted human: what the glove feels and what the body sensors read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserProfile {
    pub gesture_script: Vec<GestureStep>,
    /// deg/s
    pub gyro_bias: [f64; 3],
    /// deg/s
    pub gyro_noise_sigma: f64,
    pub heart_rate_bpm: f64,
    pub spo2_target: f64,
    pub body_temp_c: TempProfile,
    pub ambient_temp_c: f64,
    pub ecg_waveform: EcgTemplate,
    pub lead_status: LeadStatus,
}

impl Default for UserProfile {
    fn default() -> Self {
        Self {
            gesture_script: Vec::new(),
            gyro_bias: [0.0; 3],
            gyro_noise_sigma: 0.0,
            heart_rate_bpm: 72.0,
            spo2_target: 98.0,
            body_temp_c: TempProfile::Constant(36.8),
            ambient_temp_c: 25.0,
            ecg_waveform: EcgTemplate::default(),
            lead_status: LeadStatus::Connected,
        }
    }
}

impl UserProfile {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::InvalidProfile(m));
        if let Some(step) = self
            .gesture_script
            .iter()
            .find(|s| !(s.duration > 0.0 && s.duration.is_finite()) || !s.tilt.is_finite())
        {
            return bad(format!("gesture step {step:?} needs a positive duration and finite tilt"));
        }
        if !(30.0..=220.0).contains(&self.heart_rate_bpm) {
            return bad(format!("heart_rate_bpm {} outside [30, 220]", self.heart_rate_bpm));
        }
        if !(0.0..=100.0).contains(&self.spo2_target) {
            return bad(format!("spo2_target {} outside [0, 100]", self.spo2_target));
        }
        if !(self.gyro_noise_sigma >= 0.0) || !self.gyro_bias.iter().all(|b| b.is_finite()) {
            return bad("gyro bias must be finite and noise sigma non-negative".into());
        }
        if !self.ambient_temp_c.is_finite() {
            return bad("ambient_temp_c must be finite".into());
        }
        self.body_temp_c.validate().map_err(WorldError::InvalidProfile)
    }

    /// Scripted gesture and tilt at time `t`; `Stop` once the script ends.
    pub fn gesture_at(&self, t: f64) -> (Command, f64) {
        let mut start = 0.0;
        for step in &self.gesture_script {
            let end = start + step.duration;
            if t >= start && t < end {
                return (step.gesture, step.tilt);
            }
            start = end;
        }
        (Command::Stop, 0.0)
    }

    pub fn script_duration(&self) -> f64 {
        self.gesture_script.iter().map(|s| s.duration).sum()
    }
}

/// Tilt deflection for a gesture: +gy forward, -gy backward, +gx right,
/// -gx left. Stop carries no deflection.
pub fn gesture_deflection(gesture: Command, magnitude: f64) -> GyroSample {
    let (gx, gy) = match gesture {
        Command::Forward => (0.0, magnitude),
        Command::Backward => (0.0, -magnitude),
        Command::Right => (magnitude, 0.0),
        Command::Left => (-magnitude, 0.0),
        Command::Stop => (0.0, 0.0),
    };
    GyroSample::new(gx, gy, 0.0)
}

pub fn synth_gyro(profile: &UserProfile, t: f64, rng: &mut RandomStream) -> GyroSample {
    let (gesture, tilt) = profile.gesture_at(t);
    let d = gesture_deflection(gesture, tilt);
    let [bx, by, bz] = profile.gyro_bias;
    let mut s = GyroSample::new(d.gx + bx, d.gy + by, d.gz + bz);
    if profile.gyro_noise_sigma > 0.0 {
        let n = Normal::new(0.0, profile.gyro_noise_sigma).expect("validated sigma");
        s.gx += n.sample(rng);
        s.gy += n.sample(rng);
        s.gz += n.sample(rng);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpgSample {
    pub ir: f64,
    pub red: f64,
}

/// Zero-mean pulse shape over one cycle; a single maximum and minimum.
fn pulse(theta: f64) -> f64 {
    theta.sin() + PULSE_HARMONIC * (2.0 * theta).sin()
}

/// Both PPG channels at time `t`. The channels share one pulse shape, and the
/// red AC amplitude is chosen so that the ratio of ratios maps back to the
/// profile's SpO2 target.
pub fn synth_ppg(profile: &UserProfile, t: f64) -> PpgSample {
    let theta = 2.0 * PI * profile.heart_rate_bpm / 60.0 * t;
    let p = pulse(theta);
    let ratio = ratio_for_spo2(profile.spo2_target);
    let ac_ir = PPG_PERFUSION_IR * PPG_DC_IR;
    let ac_red = ratio * PPG_PERFUSION_IR * PPG_DC_RED;
    PpgSample {
        ir: PPG_DC_IR + ac_ir * p,
        red: PPG_DC_RED + ac_red * p,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcgTempSample {
    pub ecg_value: i32,
    pub ambient_temp_c: f64,
    pub object_temp_c: f64,
    pub lead_status: LeadStatus,
}

/// Readings the sensor hub samples: ECG from the periodic template (flat at
/// baseline with a lead off), skin temperature and ambient temperature.
pub fn synth_ecg_temp(profile: &UserProfile, t: f64) -> EcgTempSample {
    let ecg = &profile.ecg_waveform;
    let value = match profile.lead_status {
        LeadStatus::Off => ecg.baseline,
        LeadStatus::Connected => {
            let phase = (t * profile.heart_rate_bpm / 60.0).rem_euclid(1.0);
            ecg.sample(phase)
        }
    };
    EcgTempSample {
        ecg_value: value.round().clamp(0.0, 1023.0) as i32,
        ambient_temp_c: profile.ambient_temp_c,
        object_temp_c: profile.body_temp_c.at(t),
        lead_status: profile.lead_status,
    }
}
