//! `wheelsim`: run scenarios, Monte Carlo trials and event-log replays.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime failure, 3 acceptance
//! check failed.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wheelsim::calibration::{reference_detector_params, EVAL_OBJECTS_PER_FRAME, TARGET_PRECISION, TARGET_RECALL};
use wheelsim::runtime::{run_scenario, RunError, RunOptions};
use wheelsim::scenario::ScenarioConfig;
use wheelsim::replay::replay_file;
use wheelsim::trials::{run_detection_eval, run_gesture_trials, run_obstacle_trials, NoiseConfig, ObstacleTrialConfig};
use wheelsim_core::perception::DEFAULT_CONFIDENCE_THRESHOLD;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "wheelsim", version, about = "Smart-wheelchair simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a bundled scenario by name or a scenario JSON file.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Seconds of simulated time.
        #[arg(long)]
        duration: Option<f64>,
        /// Serve the network endpoints and run against the wall clock.
        #[arg(long)]
        serve: bool,
        /// With --serve, do not host dashboard assets.
        #[arg(long)]
        headless: bool,
        /// Output directory; defaults to out/<scenario name>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Built dashboard assets to host with --serve.
        #[arg(long)]
        assets: Option<PathBuf>,
        #[arg(long)]
        bind: Option<SocketAddr>,
    },
    /// Monte Carlo trials with a JSON report and a text table.
    Trials {
        kind: TrialKind,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Fail with exit code 3 when rates miss their targets.
        #[arg(long)]
        check: bool,
    },
    /// Summarize a recorded event log.
    Replay { events: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum TrialKind {
    Gesture,
    Obstacle,
    Detection,
}

fn write_report(path: &Option<PathBuf>, value: &impl Serialize) -> Result<(), u8> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        if let Err(e) = std::fs::write(p, text + "\n") {
            eprintln!("error: cannot write {}: {e}", p.display());
            return Err(EXIT_RUNTIME);
        }
    }
    Ok(())
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn run(cli: Cli) -> Result<(), u8> {
    match cli.command {
        Cmd::Run { scenario, seed, duration, serve, headless, out, assets, bind } => {
            let cfg = ScenarioConfig::load(&scenario).map_err(|e| {
                eprintln!("config error: {e}");
                EXIT_CONFIG
            })?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
            let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
            std::thread::spawn(move || {
                for addr in rx {
                    eprintln!("listening on http://{addr}");
                }
            });
            let opts = RunOptions {
                seed,
                duration_s: duration,
                serve,
                headless,
                out_dir,
                bind,
                assets_dir: assets,
                listening: Some(tx),
                cloud_stub: None,
            };
            match run_scenario(&cfg, &opts) {
                Ok(r) => {
                    println!("{}", serde_json::to_string_pretty(&r).expect("result serializes"));
                    Ok(())
                }
                Err(RunError::Config(e)) => {
                    eprintln!("config error: {e}");
                    Err(EXIT_CONFIG)
                }
                Err(e) => {
                    eprintln!("runtime failure: {e}");
                    Err(EXIT_RUNTIME)
                }
            }
        }
        Cmd::Trials { kind, n, seed, report, check } => {
            let ok = match kind {
                TrialKind::Gesture => {
                    let r = run_gesture_trials(n.unwrap_or(100), &NoiseConfig::reference(), seed);
                    print!("{}", r.render_table("Gesture"));
                    write_report(&report, &r)?;
                    let targets = [0.96, 0.98, 0.93, 0.95];
                    r.rows.iter().zip(targets).all(|(row, t)| within(row.success_rate, t, 0.01))
                        && within(r.total.success_rate, 0.955, 0.007)
                }
                TrialKind::Obstacle => {
                    let r = run_obstacle_trials(n.unwrap_or(50), &ObstacleTrialConfig::with_miss(0.06), seed);
                    print!("{}", r.render_table("Trial"));
                    write_report(&report, &r)?;
                    within(r.total.success_rate, 0.94, 0.007)
                }
                TrialKind::Detection => {
                    let params = reference_detector_params();
                    let r = run_detection_eval(
                        n.unwrap_or(1000),
                        EVAL_OBJECTS_PER_FRAME,
                        &params,
                        DEFAULT_CONFIDENCE_THRESHOLD,
                        seed,
                    );
                    print!("{}", r.render_table());
                    write_report(&report, &r)?;
                    within(r.metrics.precision, TARGET_PRECISION, 0.01) && within(r.metrics.recall, TARGET_RECALL, 0.01)
                }
            };
            if check && !ok {
                eprintln!("check failed: rates outside target tolerance");
                return Err(EXIT_CHECK);
            }
            Ok(())
        }
        Cmd::Replay { events } => match replay_file(&events) {
            Ok(s) => {
                println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
                Ok(())
            }
            Err(e) => {
                eprintln!("replay failed: {e}");
                Err(EXIT_RUNTIME)
            }
        },
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .init();
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(code)) => ExitCode::from(code),
        Err(_) => {
            eprintln!("runtime failure: a module panicked; the partial event log was flushed");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
