//! Event-log replay: parse a recorded `events.jsonl` and summarize it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use wheelsim_netproto::telemetry::{kind, ChairTelemetry, TelemetryEvent};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplaySummary {
    pub events: u64,
    pub by_kind: BTreeMap<String, u64>,
    pub last_time: f64,
    pub final_chair: Option<ChairTelemetry>,
    /// Body of the shutdown event, when the run finished cleanly.
    pub shutdown: Option<serde_json::Value>,
}

pub fn summarize(text: &str) -> Result<ReplaySummary, ReplayError> {
    let mut s = ReplaySummary { events: 0, by_kind: BTreeMap::new(), last_time: 0.0, final_chair: None, shutdown: None };
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let e = TelemetryEvent::parse_line(line).map_err(|e| ReplayError::Parse { line: i + 1, message: e.to_string() })?;
        s.events += 1;
        s.last_time = s.last_time.max(e.t);
        *s.by_kind.entry(e.kind.clone()).or_default() += 1;
        match e.kind.as_str() {
            kind::CHAIR => {
                s.final_chair = Some(
                    serde_json::from_value(e.body)
                        .map_err(|err| ReplayError::Parse { line: i + 1, message: err.to_string() })?,
                )
            }
            kind::SHUTDOWN => s.shutdown = Some(e.body),
            _ => {}
        }
    }
    Ok(s)
}

pub fn replay_file(path: &Path) -> Result<ReplaySummary, ReplayError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ReplayError::Io { path: path.display().to_string(), source })?;
    summarize(&text)
}
