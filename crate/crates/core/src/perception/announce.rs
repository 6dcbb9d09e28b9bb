use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::detector::Detection;
use crate::world::ObjectClass;

pub const DEFAULT_COOLDOWN_S: f64 = 5.0;

/// Text record standing in for a spoken announcement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub timestamp: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnouncerState {
    pub last_announced: BTreeMap<ObjectClass, f64>,
    pub cooldown: f64,
}

impl Default for AnnouncerState {
    fn default() -> Self {
        Self::new(DEFAULT_COOLDOWN_S)
    }
}

impl AnnouncerState {
    pub fn new(cooldown: f64) -> Self {
        Self { last_announced: BTreeMap::new(), cooldown }
    }
}

/// One utterance per distinct class not announced within the cooldown, in
/// order of first appearance.
pub fn announce(dets: &[Detection], state: &AnnouncerState, now: f64) -> (AnnouncerState, Vec<Utterance>) {
    let mut next = state.clone();
    let mut out = Vec::new();
    for d in dets {
        let due = next
            .last_announced
            .get(&d.class_label)
            .is_none_or(|last| now - last >= next.cooldown);
        if due {
            next.last_announced.insert(d.class_label, now);
            out.push(Utterance { timestamp: now, text: d.class_label.name().to_string() });
        }
    }
    (next, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::BoundingBox;
    use proptest::prelude::*;

    fn det(c: ObjectClass) -> Detection {
        Detection { class_label: c, confidence: 0.9, bbox: BoundingBox::new(0.5, 0.5, 0.1, 0.1), frame_id: 0 }
    }

    fn texts(u: &[Utterance]) -> Vec<&str> {
        u.iter().map(|u| u.text.as_str()).collect()
    }

    #[test]
    fn examples() {
        let s = AnnouncerState::default();
        let (s, u) = announce(&[det(ObjectClass::Person)], &s, 0.0);
        assert_eq!(texts(&u), ["Person"]);
        assert_eq!(s.last_announced[&ObjectClass::Person], 0.0);
        let (s, u) = announce(&[det(ObjectClass::Person)], &s, 1.0);
        assert!(u.is_empty());
        let (_, u) = announce(&[det(ObjectClass::Person), det(ObjectClass::Chair)], &s, 5.0);
        assert_eq!(texts(&u), ["Person", "Chair"]);
    }

    #[test]
    fn duplicates_in_one_frame_speak_once() {
        let (_, u) = announce(&[det(ObjectClass::Door), det(ObjectClass::Door)], &AnnouncerState::default(), 0.0);
        assert_eq!(texts(&u), ["Door"]);
    }

    proptest! {
        #[test]
        fn at_most_one_per_class_per_cooldown(
            frames in proptest::collection::vec((0.0f64..1.0, proptest::collection::vec(0usize..5, 0..4)), 1..100)
        ) {
            let mut s = AnnouncerState::default();
            let mut now = 0.0;
            let mut spoken: Vec<(f64, String)> = Vec::new();
            for (dt, classes) in frames {
                now += dt;
                let dets: Vec<_> = classes.iter().map(|i| det(ObjectClass::ALL[*i])).collect();
                let (n, u) = announce(&dets, &s, now);
                s = n;
                spoken.extend(u.into_iter().map(|u| (u.timestamp, u.text)));
            }
            for c in ObjectClass::ALL {
                let times: Vec<f64> = spoken.iter().filter(|(_, t)| t == c.name()).map(|(t, _)| *t).collect();
                for w in times.windows(2) {
                    prop_assert!(w[1] - w[0] >= DEFAULT_COOLDOWN_S);
                }
            }
        }
    }
}
