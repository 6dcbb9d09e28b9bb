//! Object detection path: camera projection of scene truth, a statistical
//! detector behind a pluggable trait, confidence filtering, spoken-class
//! announcements and precision/recall scoring.

mod announce;
mod boxes;
mod detector;
mod score;

pub use announce::{announce, AnnouncerState, Utterance, DEFAULT_COOLDOWN_S};
pub use boxes::{iou, BoundingBox, Camera, TruthBox};
pub use detector::{
    filter_detections, simulate_detections, synthetic_frame, CameraFrame, ConfidenceDist, Detection, Detector,
    DetectorParams, ParamsError, SimulatedDetector, DEFAULT_CONFIDENCE_THRESHOLD,
};
pub use score::{f1_score, score_detections, Metrics, BACKGROUND, CONFUSION_SIZE, DEFAULT_IOU_THRESHOLD};
