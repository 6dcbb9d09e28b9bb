//! Closed-form calibration of the statistical detector to target precision
//! and recall under the standard evaluation scene.
//!
//! Per frame with `n` objects, a detector with raw recall `r`, confusion
//! diagonal `d`, TP survival `q_tp` and FP survival `q_fp` at the confidence
//! threshold produces in expectation
//!
//! - true positives `n r d q_tp`,
//! - relabelled false positives `n r (1 - d) q_tp`,
//! - spurious false positives `lambda q_fp`.
//!
//! Solving for `r` and `lambda` gives the targets exactly in expectation.

use serde::{Deserialize, Serialize};
use wheelsim_core::perception::{ConfidenceDist, DetectorParams, DEFAULT_CONFIDENCE_THRESHOLD};

/// Precision and recall the detector is calibrated to.
pub const TARGET_PRECISION: f64 = 0.915;
pub const TARGET_RECALL: f64 = 0.902;
/// Objects per frame in the standard evaluation scene.
pub const EVAL_OBJECTS_PER_FRAME: usize = 4;
pub const CONFUSION_DIAGONAL: f64 = 0.99;
pub const TP_CONFIDENCE: ConfidenceDist = ConfidenceDist::Beta { alpha: 8.0, beta: 2.0 };
pub const FP_CONFIDENCE: ConfidenceDist = ConfidenceDist::Beta { alpha: 2.0, beta: 2.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub precision: f64,
    pub recall: f64,
    pub objects_per_frame: usize,
    pub confusion_diagonal: f64,
    pub threshold: f64,
}

impl Default for CalibrationTarget {
    fn default() -> Self {
        Self {
            precision: TARGET_PRECISION,
            recall: TARGET_RECALL,
            objects_per_frame: EVAL_OBJECTS_PER_FRAME,
            confusion_diagonal: CONFUSION_DIAGONAL,
            threshold: DEFAULT_CONFIDENCE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("target recall {0} needs raw recall above 1")]
    RecallUnreachable(f64),
    #[error("relabelled detections alone push precision below target")]
    PrecisionUnreachable,
}

pub fn calibrate_detector(
    target: &CalibrationTarget,
    tp: ConfidenceDist,
    fp: ConfidenceDist,
) -> Result<DetectorParams, CalibrationError> {
    let q_tp = tp.survival(target.threshold);
    let q_fp = fp.survival(target.threshold);
    let d = target.confusion_diagonal;
    let n = target.objects_per_frame as f64;
    let raw_recall = target.recall / (d * q_tp);
    if raw_recall > 1.0 {
        return Err(CalibrationError::RecallUnreachable(raw_recall));
    }
    let tp_per_frame = n * target.recall;
    let fp_needed = tp_per_frame * (1.0 / target.precision - 1.0);
    let relabelled = n * raw_recall * (1.0 - d) * q_tp;
    let spurious = fp_needed - relabelled;
    if spurious < 0.0 {
        return Err(CalibrationError::PrecisionUnreachable);
    }
    let mut params = DetectorParams::uniform(raw_recall, d, spurious / q_fp, tp);
    params.fp_confidence = fp;
    Ok(params)
}

/// Detector calibrated to the reference precision and recall.
pub fn reference_detector_params() -> DetectorParams {
    calibrate_detector(&CalibrationTarget::default(), TP_CONFIDENCE, FP_CONFIDENCE)
        .expect("reference targets are reachable")
}
