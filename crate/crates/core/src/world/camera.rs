use super::{normalize_angle, SceneObject, WorldState};

/// Angular slack for the inclusive cone boundary, absorbing `atan2` rounding.
const BOUNDARY_EPS: f64 = 1e-9;

/// Objects whose center lies in the forward cone of half-angle `fov_deg / 2`
/// and within `range_m` of the chair. Both boundaries are inclusive.
pub fn visible_objects(world: &WorldState, fov_deg: f64, range_m: f64) -> Vec<SceneObject> {
    debug_assert!(fov_deg > 0.0 && fov_deg <= 180.0 && range_m > 0.0);
    let half = fov_deg.to_radians() / 2.0;
    let pose = world.chair_pose;
    world
        .objects
        .iter()
        .filter(|o| {
            let dx = o.position[0] - pose.x;
            let dy = o.position[1] - pose.y;
            let dist = dx.hypot(dy);
            if dist > range_m + BOUNDARY_EPS {
                return false;
            }
            if dist == 0.0 {
                return true;
            }
            let bearing = normalize_angle(dy.atan2(dx) - pose.heading);
            bearing.abs() <= half + BOUNDARY_EPS
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{ChairParams, ObjectClass, Pose};

    fn world(objects: Vec<SceneObject>, heading: f64) -> WorldState {
        WorldState::new(Pose::new(0.0, 0.0, heading), ChairParams::default(), vec![], objects, 0)
            .unwrap()
    }

    fn person(x: f64, y: f64) -> SceneObject {
        SceneObject {
            class_label: ObjectClass::Person,
            position: [x, y],
            extent: 0.5,
        }
    }

    #[test]
    fn ahead_is_visible_behind_is_not() {
        let w = world(vec![person(1.0, 0.0), person(-1.0, 0.0)], 0.0);
        let v = visible_objects(&w, 60.0, 5.0);
        assert_eq!(v, vec![person(1.0, 0.0)]);
    }

    #[test]
    fn half_angle_boundary_is_inclusive() {
        let a = 30f64.to_radians();
        let w = world(vec![person(2.0 * a.cos(), 2.0 * a.sin())], 0.0);
        assert_eq!(visible_objects(&w, 60.0, 5.0).len(), 1);
        let b = 30.01f64.to_radians();
        let w = world(vec![person(2.0 * b.cos(), 2.0 * b.sin())], 0.0);
        assert!(visible_objects(&w, 60.0, 5.0).is_empty());
    }

    #[test]
    fn range_boundary_is_inclusive() {
        let w = world(vec![person(5.0, 0.0), person(5.01, 0.0)], 0.0);
        assert_eq!(visible_objects(&w, 60.0, 5.0), vec![person(5.0, 0.0)]);
    }

    #[test]
    fn cone_follows_heading() {
        let w = world(vec![person(0.0, 2.0)], std::f64::consts::FRAC_PI_2);
        assert_eq!(visible_objects(&w, 60.0, 5.0).len(), 1);
        let w = world(vec![person(0.0, 2.0)], 0.0);
        assert!(visible_objects(&w, 60.0, 5.0).is_empty());
    }
}
