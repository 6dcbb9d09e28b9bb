//! Scenario runtime, Monte Carlo trials and replay for the wheelchair
//! simulator.
//!
//! - [`scenario`]: scenario files and validation.
//! - [`runtime`]: the lockstep scenario runtime and its event log.
//! - [`trials`]: Monte Carlo trials with per-trial records and reports.
//! - [`calibration`]: detector parameters fitted to target precision and recall.
//! - [`replay`]: event-log summaries.

pub mod calibration;
pub mod replay;
pub mod runtime;
pub mod scenario;
pub mod trials;
