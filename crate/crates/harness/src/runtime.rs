//! Scenario runtime. All modules advance in lockstep on a 10 ms integer
//! clock: each tick steps the world first, then lets every module whose
//! cadence divides the tick act on the new state, in a fixed order (glove,
//! dashboard script, base, hub, monitor, camera). Under virtual time the run
//! is a pure function of the config and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use wheelsim_core::base::{base_tick, drain_latest, execute_movement, BaseState};
use wheelsim_core::gesture::{Calibrator, CommandSink, GestureController};
use wheelsim_core::health::{AlertParameter, HealthMonitor};
use wheelsim_core::hub::{byte_budget, frame_reading, serial_link};
use wheelsim_core::pacing::{Pacer, VirtualPacer, WallPacer};
use wheelsim_core::perception::{announce, filter_detections, AnnouncerState, CameraFrame, Detector, SimulatedDetector};
use wheelsim_core::rng::substream;
use wheelsim_core::world::{
    measure_ultrasonic, raycast, synth_ecg_temp, synth_gyro, synth_ppg, Pose, UltrasonicModel, WorldState,
};
use wheelsim_core::Command;
use wheelsim_netproto::cloud::{cloud_update, CloudSink, CloudStub, HttpCloudClient};
use wheelsim_netproto::email::{send_email_alert, EmailTransport, FileSinkTransport, SmtpTransport};
use wheelsim_netproto::server::{serve, ApiState, ServerConfig, CONTROL_PATH, NETWORK_NAME};
use wheelsim_netproto::telemetry::{kind, AlertFlags, ChairTelemetry, StatusSnapshot, TelemetryEvent};

use crate::scenario::{ConfigError, EmailTransportConfig, ScenarioConfig};

pub const TICK_MS: u64 = 10;
const TICK_S: f64 = TICK_MS as f64 / 1000.0;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("server: {0}")]
    Server(String),
    #[error("module failure: {0}")]
    Module(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    /// Bind the network endpoints and pace against the wall clock.
    pub serve: bool,
    /// With `serve`, skip static dashboard hosting.
    pub headless: bool,
    pub out_dir: PathBuf,
    pub bind: Option<SocketAddr>,
    pub assets_dir: Option<PathBuf>,
    /// Receives the bound address once the server is up.
    pub listening: Option<mpsc::Sender<SocketAddr>>,
    /// Stub that answers cloud updates when no endpoint is configured. A
    /// fresh one is created when absent.
    pub cloud_stub: Option<CloudStub>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunMetrics {
    pub ticks: u64,
    pub duration_s: f64,
    pub glove_frames_sent: u64,
    pub glove_send_failures: u64,
    pub dashboard_commands: u64,
    pub commands_received: u64,
    pub overrides: u64,
    pub contact: bool,
    pub min_obstacle_distance_cm: Option<f64>,
    pub distance_traveled_m: f64,
    pub final_pose: Pose,
    pub serial_frames_sent: u64,
    pub serial_frames_corrupted: u64,
    pub serial_frames_parsed: u64,
    pub serial_frames_malformed: u64,
    pub temperature_alerts: u64,
    pub spo2_alerts: u64,
    pub emails_delivered: u64,
    pub email_failures: u64,
    pub uploads: u64,
    pub upload_failures: u64,
    pub camera_frames: u64,
    pub detections: u64,
    pub utterances: u64,
    pub command_frame_errors: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioResult {
    pub scenario: String,
    pub seed: u64,
    pub config_hash: String,
    pub events_path: PathBuf,
    pub metrics: RunMetrics,
}

/// JSON-lines event log, optionally mirrored to the live stream.
struct EventLog {
    out: BufWriter<File>,
    path: PathBuf,
    live: Option<Arc<ApiState>>,
}

impl EventLog {
    fn create(path: &Path, live: Option<Arc<ApiState>>) -> Result<Self, RunError> {
        let file = File::create(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
        Ok(Self { out: BufWriter::new(file), path: path.to_path_buf(), live })
    }

    fn emit(&mut self, t: f64, kind: &str, body: impl Serialize) -> Result<(), RunError> {
        let e = TelemetryEvent::new(t, kind, body);
        self.out
            .write_all(e.to_json_line().as_bytes())
            .map_err(|source| RunError::Io { path: self.path.clone(), source })?;
        if let Some(live) = &self.live {
            live.publish(&e);
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), RunError> {
        self.out.flush().map_err(|source| RunError::Io { path: self.path.clone(), source })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Sensor-to-surface distance along the heading, ignoring noise and misses.
fn true_distance_cm(world: &WorldState) -> Option<f64> {
    raycast(&world.chair_pose, &world.obstacles).map(|m| m * 100.0)
}

/// Live-serving resources. Dropped after the run.
struct Serving {
    rt: tokio::runtime::Runtime,
    state: Arc<ApiState>,
    handle: Option<wheelsim_netproto::server::ServerHandle>,
}

impl Serving {
    fn shutdown(mut self) {
        self.state.detach();
        if let Some(h) = self.handle.take() {
            self.rt.block_on(h.shutdown());
        }
    }
}

/// Run a scenario to completion, writing `events.jsonl`, `metrics.json` and
/// `alerts/` under the output directory.
pub fn run_scenario(base_cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioResult, RunError> {
    let mut cfg = base_cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(d) = opts.duration_s {
        cfg.duration_s = d;
    }
    cfg.validate(&cfg.name.clone())?;
    let seed = cfg.seed;
    let config_hash = cfg.config_hash();

    std::fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;
    let events_path = opts.out_dir.join("events.jsonl");
    let alerts_dir = opts.out_dir.join("alerts");

    // Command channel into the base. The server, the glove and the dashboard
    // script all feed it.
    let (cmd_tx, cmd_rx) = mpsc::channel::<Command>();

    let mut serving = None;
    let stub = opts.cloud_stub.clone().unwrap_or_else(|| CloudStub::new(Some(cfg.cloud.api_key.clone())));
    let mut cloud: Box<dyn CloudSink> = match &cfg.cloud.endpoint {
        Some(url) => Box::new(HttpCloudClient::new(url.clone(), Duration::from_secs(2))),
        None => Box::new(stub.clone()),
    };
    let mut glove_sink: Box<dyn CommandSink> = Box::new(cmd_tx.clone());
    if opts.serve {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(|e| RunError::Server(e.to_string()))?;
        let state = ApiState::new(Some(stub));
        let server_cfg = ServerConfig {
            bind: opts.bind,
            assets_dir: if opts.headless { None } else { opts.assets_dir.clone() },
        };
        // The base's command server is up before the glove connects.
        let handle =
            rt.block_on(serve(server_cfg, state.clone())).map_err(|e| RunError::Server(e.to_string()))?;
        state.attach(cmd_tx.clone());
        let addr = handle.addr;
        if let Some(tx) = &opts.listening {
            let _ = tx.send(addr);
        }
        if cfg.cloud.endpoint.is_none() {
            cloud = Box::new(HttpCloudClient::new(format!("http://{addr}"), Duration::from_secs(2)));
        }
        if cfg.glove.is_some() {
            let url = format!("ws://{addr}{CONTROL_PATH}");
            glove_sink = Box::new(
                wheelsim_netproto::client::connect_blocking(rt.handle(), &url)
                    .map_err(|e| RunError::Server(e.to_string()))?,
            );
        }
        serving = Some(Serving { rt, state, handle: Some(handle) });
    }
    let live = serving.as_ref().map(|s| s.state.clone());
    let mut log = EventLog::create(&events_path, live.clone())?;

    let result = simulate(&cfg, &mut log, &cmd_tx, &cmd_rx, glove_sink.as_mut(), cloud.as_mut(), &alerts_dir, live.as_deref(), opts.serve);
    let flush = log.flush();
    if let Some(s) = serving {
        s.shutdown();
    }
    let metrics = result?;
    flush?;

    let result = ScenarioResult { scenario: cfg.name.clone(), seed, config_hash, events_path, metrics };
    let metrics_path = opts.out_dir.join("metrics.json");
    let text = serde_json::to_string_pretty(&result).expect("metrics serialize");
    std::fs::write(&metrics_path, text + "\n").map_err(io_err(&metrics_path))?;
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    cfg: &ScenarioConfig,
    log: &mut EventLog,
    cmd_tx: &mpsc::Sender<Command>,
    cmd_rx: &mpsc::Receiver<Command>,
    glove_sink: &mut dyn CommandSink,
    cloud: &mut dyn CloudSink,
    alerts_dir: &Path,
    live: Option<&ApiState>,
    wall_clock: bool,
) -> Result<RunMetrics, RunError> {
    let seed = cfg.seed;
    let n_ticks = (cfg.duration_s * 1000.0 / TICK_MS as f64).round() as u64;
    let mut m = RunMetrics { duration_s: n_ticks as f64 * TICK_S, ..RunMetrics::default() };

    let mut pacer: Box<dyn Pacer> = if wall_clock { Box::new(WallPacer::new()) } else { Box::new(VirtualPacer::new()) };
    let mut world = WorldState::new(
        cfg.world.start_pose,
        cfg.world.chair,
        cfg.world.obstacles.clone(),
        cfg.world.objects.clone(),
        seed,
    )
    .map_err(|e| RunError::Module(e.to_string()))?;
    let ultrasonic: UltrasonicModel = cfg.ultrasonic;
    let mut base = BaseState::new(cfg.base.safety_threshold_cm, cfg.base.override_scope);
    let mut glove_rng = substream(seed, "glove");
    let mut ultrasonic_rng = substream(seed, "ultrasonic");
    let mut calibrator = cfg.glove.as_ref().map(|g| Calibrator::new(g.calibration_samples));
    let mut controller: Option<GestureController> = None;

    let (serial_w, mut serial_r) = serial_link();
    let mut serial_w = serial_w.with_corruption(cfg.hub.corruption_probability, substream(seed, "serial"));
    let mut monitor = HealthMonitor::new(cfg.monitor);
    let serial_budget = byte_budget(cfg.monitor.serial_baud, Duration::from_millis(TICK_MS));
    let ppg_rate = cfg.monitor.ppg_sample_rate_hz;
    let mut next_ppg: u64 = 0;

    let mut email: Box<dyn EmailTransport> = match &cfg.email.transport {
        EmailTransportConfig::File => Box::new(FileSinkTransport::new(alerts_dir)),
        EmailTransportConfig::Smtp { addr, from } => Box::new(SmtpTransport::new(addr.clone(), from.clone())),
    };

    let mut perception = match &cfg.perception {
        Some(pc) => Some((
            pc,
            SimulatedDetector::new(pc.detector_params(seed)).map_err(|e| RunError::Module(e.to_string()))?,
            AnnouncerState::new(pc.cooldown_s),
        )),
        None => None,
    };
    let mut dashboard: Vec<_> = cfg.dashboard_commands.clone();
    dashboard.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut dashboard = dashboard.into_iter().peekable();

    log.emit(0.0, kind::STARTUP, json!({"module": "base", "endpoint": CONTROL_PATH, "network": NETWORK_NAME}))?;
    log.emit(0.0, kind::STARTUP, json!({"module": "hub", "cadenceMs": cfg.hub.cadence_ms}))?;
    log.emit(0.0, kind::STARTUP, json!({"module": "monitor", "loopPeriodMs": cfg.monitor.loop_period_ms}))?;
    if let Some(pc) = &cfg.perception {
        log.emit(0.0, kind::STARTUP, json!({"module": "perception", "framePeriodMs": pc.camera.frame_period_ms}))?;
    }
    if let Some(g) = &cfg.glove {
        log.emit(0.0, kind::STARTUP, json!({"module": "glove", "calibrationSamples": g.calibration_samples}))?;
    }

    let mut prev_pose = world.chair_pose;
    for k in 1..=n_ticks {
        pacer.wait(Duration::from_millis(TICK_MS));
        let t_ms = k * TICK_MS;
        let t = t_ms as f64 / 1000.0;

        world.step(base.motor, TICK_S);
        m.distance_traveled_m += (world.chair_pose.x - prev_pose.x).hypot(world.chair_pose.y - prev_pose.y);
        prev_pose = world.chair_pose;
        if let Some(d) = true_distance_cm(&world) {
            m.min_obstacle_distance_cm = Some(m.min_obstacle_distance_cm.map_or(d, |x: f64| x.min(d)));
            m.contact |= d <= 0.0;
        }

        // Glove: calibrate on the first samples, then classify each cadence tick.
        if let Some(g) = &cfg.glove {
            let raw = synth_gyro(&cfg.user, t, &mut glove_rng);
            match &controller {
                None => {
                    if let Some(done) = calibrator.as_mut().and_then(|c| c.push(raw)) {
                        let offsets = done.map_err(|e| RunError::Module(e.to_string()))?;
                        controller = Some(GestureController::new(offsets, g.thresholds));
                        log.emit(t, kind::STARTUP, json!({"module": "glove", "calibrated": offsets}))?;
                    }
                }
                Some(ctl) if t_ms.is_multiple_of(g.cadence_ms) => match glove_sink.send(ctl.command_for(&raw)) {
                    Ok(()) => m.glove_frames_sent += 1,
                    Err(_) => m.glove_send_failures += 1,
                },
                Some(_) => {}
            }
        }

        while let Some(c) = dashboard.next_if(|c| c.t <= t + 1e-9) {
            let _ = cmd_tx.send(c.command);
            m.dashboard_commands += 1;
            log.emit(t, kind::COMMAND, json!({"source": "dashboard", "command": c.command}))?;
        }

        if t_ms.is_multiple_of(cfg.base.tick_ms) {
            let intake = drain_latest(cmd_rx);
            m.commands_received += intake.received as u64;
            let d = measure_ultrasonic(&world, &ultrasonic, &mut ultrasonic_rng);
            let requested = intake.latest.unwrap_or(base.last_command);
            base = base_tick(&base, intake.latest, d);
            let chair = ChairTelemetry {
                x: world.chair_pose.x,
                y: world.chair_pose.y,
                heading: world.chair_pose.heading,
                motor: base.motor,
                distance_cm: d,
                last_command: base.last_command,
                override_active: base.override_active,
            };
            if base.override_active && execute_movement(requested).is_moving() {
                m.overrides += 1;
                log.emit(t, kind::OVERRIDE, json!({"distanceCm": d, "suppressed": requested}))?;
            }
            log.emit(t, kind::CHAIR, chair)?;
            if let Some(live) = live {
                live.set_status(StatusSnapshot {
                    running: true,
                    time: t,
                    chair: Some(chair),
                    vitals: monitor.latest_vitals().copied(),
                    alerts: AlertFlags {
                        temperature: monitor.alert_state().email_sent,
                        spo2: monitor.alert_state().spo2_email_sent,
                    },
                    uploads: m.uploads,
                    command_frame_errors: 0,
                });
            }
        }

        if t_ms.is_multiple_of(cfg.hub.cadence_ms) {
            let reading = synth_ecg_temp(&cfg.user, t);
            match frame_reading(&reading) {
                Ok(frame) => {
                    if let Ok(corrupted) = serial_w.write_frame(&frame) {
                        m.serial_frames_sent += 1;
                        m.serial_frames_corrupted += u64::from(corrupted);
                    }
                }
                Err(e) => tracing::warn!(error = %e, "hub reading not framed"),
            }
        }

        let mut ppg = Vec::new();
        while next_ppg as f64 / ppg_rate <= t + 1e-9 {
            ppg.push(synth_ppg(&cfg.user, next_ppg as f64 / ppg_rate));
            next_ppg += 1;
        }
        let bytes = serial_r.read_chunk(serial_budget).unwrap_or_default();
        let out = monitor.iterate(t, ppg, &bytes);
        for alert in &out.alerts {
            match alert.parameter {
                AlertParameter::ObjectTempF => m.temperature_alerts += 1,
                AlertParameter::Spo2 => m.spo2_alerts += 1,
            }
            log.emit(t, kind::ALERT, alert)?;
            let mut record = send_email_alert(alert, &cfg.email.to, email.as_mut());
            if record.delivered {
                m.emails_delivered += 1;
                // Keep the log independent of the output directory.
                if let Some(name) = Path::new(&record.detail).file_name() {
                    record.detail = name.to_string_lossy().into_owned();
                }
            } else {
                m.email_failures += 1;
            }
            log.emit(t, kind::EMAIL, record)?;
        }
        if let Some(p) = out.upload {
            match cloud_update(&p, &cfg.cloud.api_key, cloud) {
                Ok(rec) => {
                    m.uploads += 1;
                    log.emit(t, kind::UPLOAD, json!({"entryId": rec.entry_id, "query": rec.query}))?;
                }
                Err(e) => {
                    m.upload_failures += 1;
                    log.emit(t, kind::UPLOAD, json!({"error": e.to_string()}))?;
                }
            }
        }
        if t_ms.is_multiple_of(1000) {
            if let Some(v) = out.vitals {
                log.emit(t, kind::VITALS, v)?;
            }
        }

        if let Some((pc, detector, announcer)) = perception.as_mut() {
            if t_ms.is_multiple_of(pc.camera.frame_period_ms) {
                m.camera_frames += 1;
                let frame = CameraFrame { frame_id: m.camera_frames, truth: pc.camera.project(&world) };
                let kept = filter_detections(&detector.detect(&frame), pc.confidence_threshold);
                if !kept.is_empty() {
                    m.detections += kept.len() as u64;
                    log.emit(t, kind::DETECTION, json!({"frameId": frame.frame_id, "detections": kept}))?;
                }
                let (next, utterances) = announce(&kept, announcer, t);
                *announcer = next;
                for u in utterances {
                    m.utterances += 1;
                    log.emit(t, kind::UTTERANCE, u)?;
                }
            }
        }
    }

    // Pending payload on shutdown.
    if let Some(p) = monitor.flush() {
        match cloud_update(&p, &cfg.cloud.api_key, cloud) {
            Ok(rec) => {
                m.uploads += 1;
                log.emit(m.duration_s, kind::UPLOAD, json!({"entryId": rec.entry_id, "query": rec.query, "flush": true}))?;
            }
            Err(_) => m.upload_failures += 1,
        }
    }
    m.ticks = n_ticks;
    m.final_pose = world.chair_pose;
    m.serial_frames_parsed = monitor.frames_parsed;
    m.serial_frames_malformed = monitor.frames_malformed;
    m.command_frame_errors = live.map_or(0, |l| l.frame_errors());
    log.emit(m.duration_s, kind::SHUTDOWN, &m)?;
    Ok(m)
}
