use serde::{Deserialize, Serialize};

use super::boxes::{iou, TruthBox};
use super::detector::Detection;
use crate::world::ObjectClass;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
/// Row/column of the confusion matrix for "no object".
pub const BACKGROUND: usize = ObjectClass::ALL.len();
pub const CONFUSION_SIZE: usize = BACKGROUND + 1;

/// Detection counts and the derived rates. `confusion[true][predicted]`,
/// with [`BACKGROUND`] standing for a missed object or a spurious box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion_matrix: [[u64; CONFUSION_SIZE]; CONFUSION_SIZE],
}

impl Default for Metrics {
    fn default() -> Self {
        Self::from_counts(0, 0, 0, [[0; CONFUSION_SIZE]; CONFUSION_SIZE])
    }
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl Metrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, confusion_matrix: [[u64; CONFUSION_SIZE]; CONFUSION_SIZE]) -> Self {
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
        Self { tp, fp, fn_, precision, recall, f1: f1_score(precision, recall), confusion_matrix }
    }

    /// Pool counts from another batch and recompute the rates.
    pub fn merge(&self, other: &Metrics) -> Metrics {
        let mut cm = self.confusion_matrix;
        for (row, orow) in cm.iter_mut().zip(&other.confusion_matrix) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
        Metrics::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_, cm)
    }
}

/// Greedy matching in descending confidence order: each detection takes the
/// unmatched same-label truth box with the highest IoU at or above the
/// threshold. Leftovers are paired class-agnostically for the confusion
/// matrix only.
pub fn score_detections(dets: &[Detection], truth: &[TruthBox], iou_threshold: f64) -> Metrics {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));

    let mut truth_taken = vec![false; truth.len()];
    let mut det_matched = vec![false; dets.len()];
    let mut cm = [[0u64; CONFUSION_SIZE]; CONFUSION_SIZE];
    let mut tp = 0;

    let best_match = |d: &Detection, taken: &[bool], same_label: bool| {
        truth
            .iter()
            .enumerate()
            .filter(|(j, t)| !taken[*j] && (!same_label || t.class_label == d.class_label))
            .map(|(j, t)| (j, iou(&d.bbox, &t.bbox)))
            .filter(|(_, v)| *v >= iou_threshold)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
    };

    for &i in &order {
        if let Some(j) = best_match(&dets[i], &truth_taken, true) {
            truth_taken[j] = true;
            det_matched[i] = true;
            tp += 1;
            let c = truth[j].class_label.index();
            cm[c][c] += 1;
        }
    }
    let fp = det_matched.iter().filter(|m| !**m).count() as u64;
    let fn_ = truth_taken.iter().filter(|t| !**t).count() as u64;

    for &i in &order {
        if det_matched[i] {
            continue;
        }
        let predicted = dets[i].class_label.index();
        match best_match(&dets[i], &truth_taken, false) {
            Some(j) => {
                truth_taken[j] = true;
                cm[truth[j].class_label.index()][predicted] += 1;
            }
            None => cm[BACKGROUND][predicted] += 1,
        }
    }
    for (j, t) in truth.iter().enumerate() {
        if !truth_taken[j] {
            cm[t.class_label.index()][BACKGROUND] += 1;
        }
    }
    Metrics::from_counts(tp, fp, fn_, cm)
}
