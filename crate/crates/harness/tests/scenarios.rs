use std::collections::BTreeMap;

use serde_json::Value;
use wheelsim::runtime::{run_scenario, RunOptions, ScenarioResult};
use wheelsim::scenario::{ConfigError, ScenarioConfig};

fn run(name: &str) -> (ScenarioResult, Vec<Value>, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::load(name).unwrap();
    let r = run_scenario(&cfg, &RunOptions { out_dir: dir.path().into(), ..RunOptions::default() }).unwrap();
    let events = std::fs::read_to_string(&r.events_path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    (r, events, dir)
}

fn count(events: &[Value]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for e in events {
        *m.entry(e["kind"].as_str().unwrap().to_string()).or_default() += 1;
    }
    m
}

#[test]
fn fever_drive() {
    let (r, events, dir) = run("fever_drive");
    let kinds = count(&events);
    let temp_alerts = events
        .iter()
        .filter(|e| e["kind"] == "alert" && e["body"]["parameter"] == "objectTempF")
        .count();
    assert!(kinds["override"] >= 1);
    assert_eq!(temp_alerts, 1);
    // floor(60 / 10) uploads.
    assert_eq!(kinds["upload"], 6);
    assert_eq!(kinds["email"], 1);
    assert_eq!(std::fs::read_dir(dir.path().join("alerts")).unwrap().count(), 1);
    assert!(!r.metrics.contact);
    let standoff = r.metrics.min_obstacle_distance_cm.unwrap();
    assert!(standoff > 0.0 && standoff <= 20.0, "{standoff}");
    assert!(kinds["detection"] >= 1 && kinds["utterance"] >= 1);

    // The alert fires on the first frame at or above 100 F.
    let alert = events.iter().find(|e| e["kind"] == "alert").unwrap();
    assert!(alert["body"]["value"].as_f64().unwrap() >= 100.0);
    let t = alert["t"].as_f64().unwrap();
    assert!(t > 20.0 && t < 40.0, "{t}");

    // Shutdown carries the same metrics as metrics.json.
    let shutdown = events.last().unwrap();
    assert_eq!(shutdown["kind"], "shutdown");
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["metrics"], shutdown["body"]);
    assert_eq!(metrics["seed"], 42);
}

#[test]
fn idle() {
    let (r, events, _dir) = run("idle");
    let kinds = count(&events);
    assert!(!kinds.contains_key("alert"));
    assert!(!kinds.contains_key("override"));
    assert!(!kinds.contains_key("detection"));
    assert_eq!(kinds["upload"], 6);
    assert_eq!(r.metrics.distance_traveled_m, 0.0);
    assert!(events.iter().filter(|e| e["kind"] == "chair").all(|e| e["body"]["motor"] == "Stop"));
}

#[test]
fn events_are_time_ordered() {
    let (_, events, _dir) = run("fever_drive");
    let ts: Vec<f64> = events.iter().map(|e| e["t"].as_f64().unwrap()).collect();
    assert!(ts.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"name\": \"bad\",\n  \"duration_s\": 5,\n  \"world\": {},\n  \"hub\": {\"cadense_ms\": 100}\n}\n")
        .unwrap();
    let e = ScenarioConfig::load(path.to_str().unwrap()).unwrap_err();
    assert_eq!(e.field(), Some("cadense_ms"));
    assert!(matches!(e, ConfigError::Parse { line: 5, .. }), "{e}");

    std::fs::write(&path, r#"{"name": "bad", "duration_s": 5, "world": {}, "base": {"tick_ms": 15}}"#).unwrap();
    let e = ScenarioConfig::load(path.to_str().unwrap()).unwrap_err();
    assert_eq!(e.field(), Some("base.tick_ms"));
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_wheelsim");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "bad"}"#).unwrap();
    let out = std::process::Command::new(bin).args(["run"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = std::process::Command::new(bin)
        .args(["run", "idle", "--duration", "2", "--out"])
        .arg(dir.path().join("idle"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = std::process::Command::new(bin).arg("replay").arg(dir.path().join("idle/events.jsonl")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["byKind"]["chair"], 20);

    // Too few trials to land inside the tolerance band.
    let out = std::process::Command::new(bin).args(["trials", "obstacle", "--n", "3", "--check"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}
