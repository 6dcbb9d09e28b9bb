//! Wheelchair base: command intake, ultrasonic safety override and the motor
//! state machine.
//!
//! [`base_tick`] is a pure transition. The override latches: when it fires,
//! `last_command` becomes `Stop`, so the chair stays put until a new command
//! arrives while the path is clear.

use std::sync::mpsc::{Receiver, TryRecvError};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::command::Command;

pub const DEFAULT_SAFETY_THRESHOLD_CM: f64 = 20.0;
pub const DEFAULT_TICK_PERIOD: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum MotorState {
    Forward,
    Backward,
    Left,
    Right,
    #[default]
    Stop,
}

impl MotorState {
    pub fn is_moving(self) -> bool {
        self != MotorState::Stop
    }
}

/// Which motions the override stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideScope {
    /// Any motion is stopped, including backward and turning.
    #[default]
    All,
    /// Only forward motion, toward the sensor's beam, is stopped.
    ForwardOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseState {
    pub last_command: Command,
    pub motor: MotorState,
    pub last_distance_cm: f64,
    pub safety_threshold_cm: f64,
    pub override_scope: OverrideScope,
    /// Whether the override fired on the most recent tick.
    pub override_active: bool,
}

impl BaseState {
    /// Startup state: motors stopped, last command `S`.
    pub fn new(safety_threshold_cm: f64, override_scope: OverrideScope) -> Self {
        assert!(safety_threshold_cm > 0.0, "safety threshold must be positive");
        Self {
            last_command: Command::Stop,
            motor: MotorState::Stop,
            last_distance_cm: f64::INFINITY,
            safety_threshold_cm,
            override_scope,
            override_active: false,
        }
    }
}

impl Default for BaseState {
    fn default() -> Self {
        Self::new(DEFAULT_SAFETY_THRESHOLD_CM, OverrideScope::All)
    }
}

pub fn execute_movement(c: Command) -> MotorState {
    match c {
        Command::Forward => MotorState::Forward,
        Command::Backward => MotorState::Backward,
        Command::Left => MotorState::Left,
        Command::Right => MotorState::Right,
        Command::Stop => MotorState::Stop,
    }
}

/// One control-loop iteration: take the incoming command (if any), then
/// apply the override against the distance `d_cm` measured this tick.
pub fn base_tick(state: &BaseState, incoming: Option<Command>, d_cm: f64) -> BaseState {
    let mut next = state.clone();
    if let Some(c) = incoming {
        next.last_command = c;
    }
    next.last_distance_cm = d_cm;

    let blocked = d_cm <= state.safety_threshold_cm;
    let in_scope = match state.override_scope {
        OverrideScope::All => true,
        OverrideScope::ForwardOnly => next.last_command == Command::Forward,
    };
    if blocked && in_scope {
        next.motor = MotorState::Stop;
        next.last_command = Command::Stop;
        next.override_active = true;
    } else {
        next.motor = execute_movement(next.last_command);
        next.override_active = false;
    }
    next
}

/// Result of draining the command channel for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Intake {
    /// Most recent command received since the previous tick.
    pub latest: Option<Command>,
    pub received: usize,
    pub disconnected: bool,
}

/// Drain every queued command without blocking. Only the most recent one is
/// applied by the tick; older ones within the same period are superseded.
pub fn drain_latest(rx: &Receiver<Command>) -> Intake {
    let mut intake = Intake::default();
    loop {
        match rx.try_recv() {
            Ok(c) => {
                intake.latest = Some(c);
                intake.received += 1;
            }
            Err(TryRecvError::Empty) => break,
            Err(TryRecvError::Disconnected) => {
                intake.disconnected = true;
                break;
            }
        }
    }
    intake
}
