use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Beta, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use super::boxes::{BoundingBox, TruthBox};
use crate::rng::RandomStream;
use crate::world::ObjectClass;

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.5;
const N_CLASSES: usize = ObjectClass::ALL.len();

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamsError {
    #[error("{0} must be a probability in [0, 1]")]
    Probability(String),
    #[error("confusion matrix must be {N_CLASSES}x{N_CLASSES}")]
    ConfusionShape,
    #[error("confusion row {row} sums to {sum}, expected 1")]
    ConfusionRow { row: usize, sum: f64 },
    #[error("invalid confidence distribution: {0}")]
    Confidence(String),
    #[error("false_positive_rate must be finite and non-negative")]
    FalsePositiveRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_label: ObjectClass,
    pub confidence: f64,
    pub bbox: BoundingBox,
    pub frame_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub frame_id: u64,
    pub truth: Vec<TruthBox>,
}

/// Confidence score distribution on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ConfidenceDist {
    Beta { alpha: f64, beta: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl ConfidenceDist {
    pub fn validate(&self) -> Result<(), ParamsError> {
        match *self {
            ConfidenceDist::Beta { alpha, beta } if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() => {
                Ok(())
            }
            ConfidenceDist::Uniform { lo, hi } if (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi => {
                Ok(())
            }
            other => Err(ParamsError::Confidence(format!("{other:?}"))),
        }
    }

    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        match *self {
            ConfidenceDist::Beta { alpha, beta } => Beta::new(alpha, beta).expect("validated").sample(rng),
            ConfidenceDist::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..=hi)
                }
            }
        }
    }

    /// Probability that a draw is at least `t`.
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            ConfidenceDist::Beta { alpha, beta } => {
                let d = statrs::distribution::Beta::new(alpha, beta).expect("validated");
                1.0 - d.cdf(t.clamp(0.0, 1.0))
            }
            ConfidenceDist::Uniform { lo, hi } => {
                if t <= lo {
                    1.0
                } else if t > hi {
                    0.0
                } else if hi == lo {
                    1.0
                } else {
                    (hi - t) / (hi - lo)
                }
            }
        }
    }
}

/// Parameters of the statistical detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    /// Probability that a visible object yields a detection at all.
    pub recall_per_class: BTreeMap<ObjectClass, f64>,
    /// Expected spurious detections per frame.
    pub false_positive_rate: f64,
    /// Row-stochastic: `confusion[true][reported]`.
    pub confusion: Vec<Vec<f64>>,
    pub tp_confidence: ConfidenceDist,
    pub fp_confidence: ConfidenceDist,
    /// Bounded relative jitter on box center and size.
    pub box_jitter: f64,
    pub seed: u64,
}

impl DetectorParams {
    /// Perfect detector: every object found, correctly labelled, confidently.
    pub fn identity() -> Self {
        Self::uniform(1.0, 1.0, 0.0, ConfidenceDist::Uniform { lo: 0.9, hi: 1.0 })
    }

    /// Same recall for every class and a confusion matrix with `diag` on the
    /// diagonal and the rest spread evenly.
    pub fn uniform(recall: f64, diag: f64, false_positive_rate: f64, tp_confidence: ConfidenceDist) -> Self {
        let off = (1.0 - diag) / (N_CLASSES - 1) as f64;
        let confusion = (0..N_CLASSES)
            .map(|i| (0..N_CLASSES).map(|j| if i == j { diag } else { off }).collect())
            .collect();
        Self {
            recall_per_class: ObjectClass::ALL.iter().map(|c| (*c, recall)).collect(),
            false_positive_rate,
            confusion,
            tp_confidence,
            fp_confidence: ConfidenceDist::Beta { alpha: 2.0, beta: 2.0 },
            box_jitter: 0.05,
            seed: 0,
        }
    }

    pub fn recall(&self, c: ObjectClass) -> f64 {
        self.recall_per_class.get(&c).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let prob = |name: String, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(ParamsError::Probability(name))
            }
        };
        for (c, r) in &self.recall_per_class {
            prob(format!("recall for {c}"), *r)?;
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate.is_finite()) {
            return Err(ParamsError::FalsePositiveRate);
        }
        if self.confusion.len() != N_CLASSES || self.confusion.iter().any(|r| r.len() != N_CLASSES) {
            return Err(ParamsError::ConfusionShape);
        }
        for (i, row) in self.confusion.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                prob(format!("confusion[{i}][{j}]"), *p)?;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(ParamsError::ConfusionRow { row: i, sum });
            }
        }
        prob("box_jitter".into(), self.box_jitter)?;
        self.tp_confidence.validate()?;
        self.fp_confidence.validate()
    }
}

fn sample_row(row: &[f64], rng: &mut RandomStream) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // Rounding left a sliver above the last cumulative sum.
    row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
}

fn jitter(b: &BoundingBox, amount: f64, rng: &mut RandomStream) -> BoundingBox {
    if amount == 0.0 {
        return *b;
    }
    let mut j = || rng.random_range(-amount..=amount);
    let out = BoundingBox::new(b.cx + j() * b.w, b.cy + j() * b.h, b.w * (1.0 + j()), b.h * (1.0 + j()));
    out.clip_to_frame().unwrap_or(*b)
}

fn random_box(rng: &mut RandomStream) -> BoundingBox {
    let w = rng.random_range(0.05..0.3);
    let h = rng.random_range(0.05..0.3);
    let cx = rng.random_range(w / 2.0..1.0 - w / 2.0);
    let cy = rng.random_range(h / 2.0..1.0 - h / 2.0);
    BoundingBox::new(cx, cy, w, h)
}

/// Detections for one frame. Each truth object is found with its class
/// recall, relabelled through the confusion row, scored from the TP
/// confidence distribution and boxed with bounded jitter. A Poisson number of
/// spurious detections with random labels and boxes follows.
pub fn simulate_detections(
    truth: &[TruthBox],
    params: &DetectorParams,
    frame_id: u64,
    rng: &mut RandomStream,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for t in truth {
        if rng.random::<f64>() >= params.recall(t.class_label) {
            continue;
        }
        let label = sample_row(&params.confusion[t.class_label.index()], rng);
        out.push(Detection {
            class_label: ObjectClass::from_index(label).expect("row length checked"),
            confidence: params.tp_confidence.sample(rng),
            bbox: jitter(&t.bbox, params.box_jitter, rng),
            frame_id,
        });
    }
    if params.false_positive_rate > 0.0 {
        let n = Poisson::new(params.false_positive_rate).expect("validated rate").sample(rng) as usize;
        for _ in 0..n {
            let label = ObjectClass::ALL[rng.random_range(0..N_CLASSES)];
            out.push(Detection {
                class_label: label,
                confidence: params.fp_confidence.sample(rng),
                bbox: random_box(rng),
                frame_id,
            });
        }
    }
    out
}

/// Keep detections with confidence at or above `threshold`, in order.
pub fn filter_detections(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.confidence >= threshold).copied().collect()
}

/// A detector turns camera frames into scored boxes.
pub trait Detector {
    fn detect(&mut self, frame: &CameraFrame) -> Vec<Detection>;
}

#[derive(Debug, Clone)]
pub struct SimulatedDetector {
    pub params: DetectorParams,
    rng: RandomStream,
}

impl SimulatedDetector {
    pub fn new(params: DetectorParams) -> Result<Self, ParamsError> {
        params.validate()?;
        let rng = crate::rng::substream(params.seed, "detector");
        Ok(Self { params, rng })
    }
}

impl Detector for SimulatedDetector {
    fn detect(&mut self, frame: &CameraFrame) -> Vec<Detection> {
        simulate_detections(&frame.truth, &self.params, frame.frame_id, &mut self.rng)
    }
}

/// Evaluation frame with `n_objects` non-overlapping boxes, one per vertical
/// strip of the image, with uniformly drawn classes.
pub fn synthetic_frame(frame_id: u64, n_objects: usize, rng: &mut RandomStream) -> CameraFrame {
    let slot = 1.0 / n_objects.max(1) as f64;
    let truth = (0..n_objects)
        .map(|i| {
            let w = slot * rng.random_range(0.3..0.8);
            let cx = i as f64 * slot + w / 2.0 + rng.random_range(0.0..slot - w);
            let h = rng.random_range(0.1..0.6);
            let cy = rng.random_range(h / 2.0..1.0 - h / 2.0);
            TruthBox {
                class_label: ObjectClass::ALL[rng.random_range(0..N_CLASSES)],
                bbox: BoundingBox::new(cx, cy, w, h),
            }
        })
        .collect();
    CameraFrame { frame_id, truth }
}
