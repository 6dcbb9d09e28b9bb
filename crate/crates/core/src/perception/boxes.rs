use serde::{Deserialize, Serialize};

use crate::world::{normalize_angle, ObjectClass, WorldState};

/// Normalized `(cx, cy, w, h)` in frame coordinates, x to the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { cx: (x0 + x1) / 2.0, cy: (y0 + y1) / 2.0, w: x1 - x0, h: y1 - y0 }
    }

    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.cx + self.w / 2.0, self.cy + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Intersection with the unit frame; `None` if nothing is left.
    pub fn clip_to_frame(&self) -> Option<Self> {
        let (x0, y0, x1, y1) = self.corners();
        let (x0, y0, x1, y1) = (x0.max(0.0), y0.max(0.0), x1.min(1.0), y1.min(1.0));
        (x1 > x0 && y1 > y0).then(|| Self::from_corners(x0, y0, x1, y1))
    }

    pub fn is_in_frame(&self) -> bool {
        let (x0, y0, x1, y1) = self.corners();
        const SLACK: f64 = 1e-12;
        self.w > 0.0 && self.h > 0.0 && x0 >= -SLACK && y0 >= -SLACK && x1 <= 1.0 + SLACK && y1 <= 1.0 + SLACK
    }
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Ground-truth box of a visible object as the camera sees it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthBox {
    pub class_label: ObjectClass,
    pub bbox: BoundingBox,
}

/// Forward pinhole camera on the chair. Objects are projected by bearing and
/// angular width; the vertical axis is not modelled, so boxes are centred at
/// mid-height with height equal to width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Camera {
    pub fov_deg: f64,
    pub range_m: f64,
    pub frame_period_ms: u64,
}

impl Default for Camera {
    fn default() -> Self {
        Self { fov_deg: 60.0, range_m: 5.0, frame_period_ms: 100 }
    }
}

impl Camera {
    pub fn project(&self, world: &WorldState) -> Vec<TruthBox> {
        let fov = self.fov_deg.to_radians();
        let pose = world.chair_pose;
        crate::world::visible_objects(world, self.fov_deg, self.range_m)
            .into_iter()
            .filter_map(|o| {
                let dx = o.position[0] - pose.x;
                let dy = o.position[1] - pose.y;
                let d = dx.hypot(dy).max(1e-6);
                let bearing = normalize_angle(dy.atan2(dx) - pose.heading);
                // Positive bearing is to the left, which is smaller x in the image.
                let cx = 0.5 - bearing / fov;
                let w = 2.0 * (o.extent / 2.0 / d).atan() / fov;
                BoundingBox::new(cx, 0.5, w, w.min(1.0))
                    .clip_to_frame()
                    .map(|bbox| TruthBox { class_label: o.class_label, bbox })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{ChairParams, Pose, SceneObject};
    use proptest::prelude::*;

    #[test]
    fn iou_examples() {
        let a = BoundingBox::new(0.5, 0.5, 0.2, 0.2);
        assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(iou(&a, &BoundingBox::new(0.9, 0.9, 0.1, 0.1)), 0.0);
        // Half overlap along x: inter 0.02, union 0.06.
        let b = BoundingBox::new(0.6, 0.5, 0.2, 0.2);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn centred_object_projects_to_centre() {
        let obj = SceneObject { class_label: ObjectClass::Door, position: [2.0, 0.0], extent: 1.0 };
        let w = WorldState::new(Pose::new(0.0, 0.0, 0.0), ChairParams::default(), vec![], vec![obj], 0).unwrap();
        let t = Camera::default().project(&w);
        assert_eq!(t.len(), 1);
        assert!((t[0].bbox.cx - 0.5).abs() < 1e-12);
        let expected_w = 2.0 * (0.25f64).atan() / 60f64.to_radians();
        assert!((t[0].bbox.w - expected_w).abs() < 1e-12);
    }

    #[test]
    fn left_objects_appear_left() {
        let obj = SceneObject { class_label: ObjectClass::Person, position: [2.0, 0.5], extent: 0.4 };
        let w = WorldState::new(Pose::new(0.0, 0.0, 0.0), ChairParams::default(), vec![], vec![obj], 0).unwrap();
        assert!(Camera::default().project(&w)[0].bbox.cx < 0.5);
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(
            a in (0.1f64..0.9, 0.1f64..0.9, 0.01f64..0.5, 0.01f64..0.5),
            b in (0.1f64..0.9, 0.1f64..0.9, 0.01f64..0.5, 0.01f64..0.5),
        ) {
            let a = BoundingBox::new(a.0, a.1, a.2, a.3);
            let b = BoundingBox::new(b.0, b.1, b.2, b.3);
            let x = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert!((x - iou(&b, &a)).abs() < 1e-12);
        }

        #[test]
        fn projected_boxes_stay_in_frame(x in 0.2f64..5.0, y in -3.0f64..3.0, e in 0.05f64..2.0) {
            let obj = SceneObject { class_label: ObjectClass::Chair, position: [x, y], extent: e };
            let w = WorldState::new(Pose::new(0.0, 0.0, 0.0), ChairParams::default(), vec![], vec![obj], 0).unwrap();
            for t in Camera::default().project(&w) {
                prop_assert!(t.bbox.is_in_frame());
            }
        }
    }
}
