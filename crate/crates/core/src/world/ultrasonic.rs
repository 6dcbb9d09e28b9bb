//! Forward-facing range sensor modeled as a single ray from the chair pose.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Obstacle, Pose, Shape, WorldError, WorldState};
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UltrasonicModel {
    pub max_range_cm: f64,
    pub noise_sigma_cm: f64,
    /// Probability that a reading misses and saturates at `max_range_cm`.
    pub miss_probability: f64,
}

impl Default for UltrasonicModel {
    fn default() -> Self {
        Self {
            max_range_cm: 400.0,
            noise_sigma_cm: 0.0,
            miss_probability: 0.0,
        }
    }
}

impl UltrasonicModel {
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.max_range_cm > 20.0 && self.max_range_cm.is_finite()) {
            return Err(WorldError::InvalidUltrasonic(
                "max_range_cm must exceed 20".into(),
            ));
        }
        if !(self.noise_sigma_cm >= 0.0 && self.noise_sigma_cm.is_finite()) {
            return Err(WorldError::InvalidUltrasonic(
                "noise_sigma_cm must be non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.miss_probability) {
            return Err(WorldError::InvalidUltrasonic(
                "miss_probability must be within [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Distance in meters from `pose` along its heading to the nearest obstacle
/// surface, or `None` when the ray hits nothing. A pose inside a circular
/// obstacle reads zero.
pub fn raycast(pose: &Pose, obstacles: &[Obstacle]) -> Option<f64> {
    let origin = [pose.x, pose.y];
    let dir = [pose.heading.cos(), pose.heading.sin()];
    obstacles
        .iter()
        .filter_map(|o| match &o.shape {
            Shape::Circle { center, radius } => ray_circle(origin, dir, *center, *radius),
            Shape::Segment { from, to } => ray_segment(origin, dir, *from, *to),
        })
        .min_by(f64::total_cmp)
}

fn ray_circle(o: [f64; 2], d: [f64; 2], c: [f64; 2], r: f64) -> Option<f64> {
    let oc = [o[0] - c[0], o[1] - c[1]];
    let b = d[0] * oc[0] + d[1] * oc[1];
    let k = oc[0] * oc[0] + oc[1] * oc[1] - r * r;
    if k <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - k;
    if disc < 0.0 {
        return None;
    }
    // k > 0 and the origin is outside, so the near root is the entry point.
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

fn ray_segment(o: [f64; 2], d: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let e = [b[0] - a[0], b[1] - a[1]];
    let ao = [a[0] - o[0], a[1] - o[1]];
    let cross = |u: [f64; 2], v: [f64; 2]| u[0] * v[1] - u[1] * v[0];
    let denom = cross(d, e);
    if denom.abs() < 1e-15 {
        if cross(ao, d).abs() > 1e-12 {
            return None;
        }
        // Collinear: nearest endpoint in front of the origin, or zero if the
        // origin already lies on the segment.
        let ta = ao[0] * d[0] + ao[1] * d[1];
        let tb = (b[0] - o[0]) * d[0] + (b[1] - o[1]) * d[1];
        return match (ta >= 0.0, tb >= 0.0) {
            (true, true) => Some(ta.min(tb)),
            (false, false) => None,
            _ => Some(0.0),
        };
    }
    let t = cross(ao, e) / denom;
    let u = cross(ao, d) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// One sensor reading in centimeters.
pub fn measure_ultrasonic(world: &WorldState, model: &UltrasonicModel, rng: &mut RandomStream) -> f64 {
    let missed = model.miss_probability > 0.0 && rng.random::<f64>() < model.miss_probability;
    let noise = if model.noise_sigma_cm > 0.0 {
        Normal::new(0.0, model.noise_sigma_cm)
            .expect("validated sigma")
            .sample(rng)
    } else {
        0.0
    };
    if missed {
        return model.max_range_cm;
    }
    match raycast(&world.chair_pose, &world.obstacles) {
        Some(m) => (m * 100.0 + noise).clamp(0.0, model.max_range_cm),
        None => model.max_range_cm,
    }
}
