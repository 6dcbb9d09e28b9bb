//! Hardware-free models of the smart-wheelchair modules.
//!
//! Every module here is a pure state transition or a loop over an explicit
//! [`pacing::Pacer`], so the same code runs against virtual time in tests and
//! against the wall clock when the simulator is served live.
//!
//! - [`world`]: chair kinematics, obstacles, scene objects and synthetic sensor signals.
//! - [`gesture`]: glove calibration and threshold classification.
//! - [`base`]: motor state machine with the ultrasonic safety override.
//! - [`hub`]: CSV framing of ECG/temperature readings over a simulated serial link.
//! - [`health`]: vitals computation, alert latches and upload scheduling.
//! - [`perception`]: statistical detector, confidence filter, announcer and scorer.

pub mod base;
pub mod command;
pub mod gesture;
pub mod health;
pub mod hub;
pub mod pacing;
pub mod perception;
pub mod rng;
pub mod world;

pub use command::Command;
