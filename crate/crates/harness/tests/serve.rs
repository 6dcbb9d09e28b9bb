use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value;
use wheelsim::runtime::{run_scenario, RunOptions};
use wheelsim::scenario::ScenarioConfig;
use wheelsim_core::world::TempProfile;

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(2)))
        .build()
        .into()
}

fn status(agent: &ureq::Agent, base: &str) -> Option<Value> {
    let mut r = agent.get(&format!("{base}/api/status")).call().ok()?;
    if r.status() != 200 {
        return None;
    }
    serde_json::from_str(&r.body_mut().read_to_string().ok()?).ok()
}

/// Start a served run on its own thread and return its base URL.
fn start(cfg: ScenarioConfig, out: std::path::PathBuf) -> (String, thread::JoinHandle<()>) {
    let (tx, rx) = mpsc::channel();
    let handle = thread::spawn(move || {
        let opts = RunOptions { serve: true, headless: true, out_dir: out, listening: Some(tx), ..RunOptions::default() };
        run_scenario(&cfg, &opts).unwrap();
    });
    let addr = rx.recv_timeout(Duration::from_secs(10)).expect("server came up");
    (format!("http://{addr}"), handle)
}

fn poll(timeout: Duration, mut f: impl FnMut() -> bool) -> Option<Duration> {
    let start = Instant::now();
    while start.elapsed() < timeout {
        if f() {
            return Some(start.elapsed());
        }
        thread::sleep(Duration::from_millis(5));
    }
    None
}

#[test]
fn dashboard_command_reaches_the_motor() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::load("idle").unwrap();
    cfg.glove = None;
    cfg.duration_s = 3.0;
    let (base, handle) = start(cfg, dir.path().into());
    let agent = agent();
    assert!(poll(Duration::from_secs(2), || status(&agent, &base).is_some()).is_some());

    let mut r = agent
        .post(&format!("{base}/api/command"))
        .content_type("application/json")
        .send(r#"{"command":"L"}"#)
        .unwrap();
    assert_eq!(r.status(), 200);
    assert_eq!(r.body_mut().read_to_string().unwrap(), r#"{"accepted":"L"}"#);
    let took = poll(Duration::from_secs(1), || {
        status(&agent, &base).is_some_and(|s| s["chair"]["motor"] == "Left")
    })
    .expect("motor turned left");
    // One 100 ms base tick plus scheduling slack.
    assert!(took < Duration::from_millis(400), "{took:?}");

    let bad = agent.post(&format!("{base}/api/command")).content_type("application/json").send(r#"{"command":"X"}"#);
    assert_eq!(bad.unwrap().status(), 400);
    handle.join().unwrap();
}

#[test]
fn fever_shows_in_status() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::load("fever_drive").unwrap();
    cfg.user.body_temp_c = TempProfile::Constant(38.5);
    cfg.duration_s = 3.0;
    let (base, handle) = start(cfg, dir.path().into());
    let agent = agent();
    let mut last = Value::Null;
    let seen = poll(Duration::from_secs(3), || {
        if let Some(s) = status(&agent, &base) {
            last = s;
        }
        last["alerts"]["temperature"] == true && last["vitals"]["objectTempF"].as_f64().is_some_and(|f| f > 100.0)
    });
    assert!(seen.is_some(), "{last}");
    handle.join().unwrap();
    assert_eq!(std::fs::read_dir(dir.path().join("alerts")).unwrap().count(), 1);
}
