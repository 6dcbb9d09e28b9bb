//! Wire formats and network endpoints of the wheelchair simulator.
//!
//! - [`command`]: one-character control frames.
//! - [`cloud`]: cloud update queries, HTTP client and in-process stub.
//! - [`email`]: alert email rendering and transports.
//! - [`telemetry`]: event and status schema.
//! - [`server`]: control socket, dashboard API, telemetry stream, static assets.
//! - [`client`]: control socket client.

pub mod client;
pub mod cloud;
pub mod command;
pub mod email;
pub mod server;
pub mod telemetry;
