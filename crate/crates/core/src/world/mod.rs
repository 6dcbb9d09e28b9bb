//! Simulated physical world: a differential-drive chair on a 2D plane,
//! obstacles for the ultrasonic beam, detectable objects for the camera, and
//! the scripted user whose body produces the glove and vitals signals.
//!
//! Exactly one owner steps a [`WorldState`]; everything else reads snapshots.

mod camera;
mod signals;
mod ultrasonic;

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::base::MotorState;

pub use camera::visible_objects;
pub use signals::{
    gesture_deflection, synth_ecg_temp, synth_gyro, synth_ppg, EcgTemplate, EcgTempSample,
    GestureStep, LeadStatus, PpgSample, TempProfile, UserProfile, PPG_DC_IR, PPG_DC_RED,
    PPG_PERFUSION_IR,
};
pub use ultrasonic::{measure_ultrasonic, raycast, UltrasonicModel};

pub const DEFAULT_LINEAR_SPEED: f64 = 0.5;
pub const DEFAULT_ANGULAR_SPEED: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("obstacle {id:?}: {reason}")]
    InvalidObstacle { id: String, reason: String },
    #[error("duplicate obstacle id {0:?}")]
    DuplicateObstacle(String),
    #[error("invalid ultrasonic model: {0}")]
    InvalidUltrasonic(String),
    #[error("invalid user profile: {0}")]
    InvalidProfile(String),
    #[error("invalid scene object: {0}")]
    InvalidObject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians, counter-clockwise from +x, normalized to [-pi, pi).
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }
}

pub fn normalize_angle(a: f64) -> f64 {
    let wrapped = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2*pi for tiny negative inputs.
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Configured drive speeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChairParams {
    pub linear_speed: f64,
    pub angular_speed: f64,
}

impl Default for ChairParams {
    fn default() -> Self {
        Self {
            linear_speed: DEFAULT_LINEAR_SPEED,
            angular_speed: DEFAULT_ANGULAR_SPEED,
        }
    }
}

/// Instantaneous chair velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub linear: f64,
    pub angular: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Circle { center: [f64; 2], radius: f64 },
    /// Axis-aligned wall segment.
    Segment { from: [f64; 2], to: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub id: String,
    pub shape: Shape,
}

impl Obstacle {
    pub fn circle(id: impl Into<String>, center: [f64; 2], radius: f64) -> Self {
        Self {
            id: id.into(),
            shape: Shape::Circle { center, radius },
        }
    }

    pub fn segment(id: impl Into<String>, from: [f64; 2], to: [f64; 2]) -> Self {
        Self {
            id: id.into(),
            shape: Shape::Segment { from, to },
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |reason: &str| WorldError::InvalidObstacle {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        match &self.shape {
            Shape::Circle { center, radius } => {
                if !(center[0].is_finite() && center[1].is_finite()) {
                    return Err(bad("center must be finite"));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(bad("radius must be positive"));
                }
            }
            Shape::Segment { from, to } => {
                if !from.iter().chain(to.iter()).all(|v| v.is_finite()) {
                    return Err(bad("endpoints must be finite"));
                }
                if from == to {
                    return Err(bad("segment has zero length"));
                }
                if from[0] != to[0] && from[1] != to[1] {
                    return Err(bad("segment must be axis-aligned"));
                }
            }
        }
        Ok(())
    }
}

/// The five object classes the detector is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Person,
    Chair,
    Table,
    Door,
    Bottle,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 5] = [
        ObjectClass::Person,
        ObjectClass::Chair,
        ObjectClass::Table,
        ObjectClass::Door,
        ObjectClass::Bottle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ObjectClass> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Person => "Person",
            ObjectClass::Chair => "Chair",
            ObjectClass::Table => "Table",
            ObjectClass::Door => "Door",
            ObjectClass::Bottle => "Bottle",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub class_label: ObjectClass,
    pub position: [f64; 2],
    /// Characteristic width in meters.
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
    pub chair_pose: Pose,
    pub chair_speed: Velocity,
    pub chair: ChairParams,
    pub obstacles: Vec<Obstacle>,
    pub objects: Vec<SceneObject>,
    pub rng_seed: u64,
}

impl WorldState {
    pub fn new(
        pose: Pose,
        chair: ChairParams,
        obstacles: Vec<Obstacle>,
        objects: Vec<SceneObject>,
        rng_seed: u64,
    ) -> Result<Self, WorldError> {
        let mut ids = HashSet::new();
        for o in &obstacles {
            o.validate()?;
            if !ids.insert(o.id.as_str()) {
                return Err(WorldError::DuplicateObstacle(o.id.clone()));
            }
        }
        for obj in &objects {
            if !(obj.extent > 0.0 && obj.extent.is_finite()) {
                return Err(WorldError::InvalidObject(format!(
                    "{} extent must be positive",
                    obj.class_label
                )));
            }
        }
        Ok(Self {
            time: 0.0,
            chair_pose: Pose::new(pose.x, pose.y, pose.heading),
            chair_speed: Velocity::default(),
            chair,
            obstacles,
            objects,
            rng_seed,
        })
    }

    /// Advance in place by `dt` seconds under `motor`.
    pub fn step(&mut self, motor: MotorState, dt: f64) {
        debug_assert!(dt > 0.0);
        let v = self.chair.linear_speed;
        let w = self.chair.angular_speed;
        self.chair_speed = match motor {
            MotorState::Forward => Velocity { linear: v, angular: 0.0 },
            MotorState::Backward => Velocity { linear: -v, angular: 0.0 },
            MotorState::Left => Velocity { linear: 0.0, angular: w },
            MotorState::Right => Velocity { linear: 0.0, angular: -w },
            MotorState::Stop => Velocity::default(),
        };
        let pose = &mut self.chair_pose;
        if self.chair_speed.linear != 0.0 {
            pose.x += self.chair_speed.linear * pose.heading.cos() * dt;
            pose.y += self.chair_speed.linear * pose.heading.sin() * dt;
        }
        if self.chair_speed.angular != 0.0 {
            pose.heading = normalize_angle(pose.heading + self.chair_speed.angular * dt);
        }
        self.time += dt;
    }
}

/// Pure form of [`WorldState::step`].
pub fn step_world(world: &WorldState, motor: MotorState, dt: f64) -> WorldState {
    let mut next = world.clone();
    next.step(motor, dt);
    next
}
