//! Scenario files: world, user, module settings and scripted inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wheelsim_core::base::{OverrideScope, DEFAULT_SAFETY_THRESHOLD_CM};
use wheelsim_core::gesture::{GestureThresholds, DEFAULT_CALIBRATION_SAMPLES};
use wheelsim_core::health::MonitorConfig;
use wheelsim_core::perception::{Camera, DetectorParams, DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_COOLDOWN_S};
use wheelsim_core::world::{ChairParams, Obstacle, Pose, SceneObject, UltrasonicModel, UserProfile};
use wheelsim_core::Command;

use crate::calibration::reference_detector_params;

/// Bundled scenarios, addressable by name on the command line.
pub const BUNDLED: &[(&str, &str)] = &[
    ("fever_drive", include_str!("../scenarios/fever_drive.json")),
    ("idle", include_str!("../scenarios/idle.json")),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{source_name}:{line}:{column}: {message}")]
    Parse { source_name: String, line: usize, column: usize, message: String },
    #[error("{source_name}: invalid value for `{field}`: {message}")]
    Invalid { source_name: String, field: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ConfigError {
    /// The offending key, when the error names one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            ConfigError::Parse { message, .. } => {
                let start = message.find('`')? + 1;
                let len = message[start..].find('`')?;
                Some(&message[start..start + len])
            }
            ConfigError::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    #[serde(default)]
    pub start_pose: Pose,
    #[serde(default)]
    pub chair: ChairParams,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GloveConfig {
    pub thresholds: GestureThresholds,
    pub calibration_samples: usize,
    pub cadence_ms: u64,
}

impl Default for GloveConfig {
    fn default() -> Self {
        Self { thresholds: GestureThresholds::default(), calibration_samples: DEFAULT_CALIBRATION_SAMPLES, cadence_ms: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseConfig {
    pub safety_threshold_cm: f64,
    pub override_scope: OverrideScope,
    pub tick_ms: u64,
}

impl Default for BaseConfig {
    fn default() -> Self {
        Self { safety_threshold_cm: DEFAULT_SAFETY_THRESHOLD_CM, override_scope: OverrideScope::All, tick_ms: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HubConfig {
    pub cadence_ms: u64,
    pub corruption_probability: f64,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self { cadence_ms: 100, corruption_probability: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionConfig {
    pub camera: Camera,
    /// Calibrated defaults when absent.
    pub detector: Option<DetectorParams>,
    pub confidence_threshold: f64,
    pub cooldown_s: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            camera: Camera::default(),
            detector: None,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            cooldown_s: DEFAULT_COOLDOWN_S,
        }
    }
}

impl PerceptionConfig {
    pub fn detector_params(&self, seed: u64) -> DetectorParams {
        let mut p = self.detector.clone().unwrap_or_else(reference_detector_params);
        p.seed = seed;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudConfig {
    pub api_key: String,
    /// Base URL of an external endpoint. The built-in stub is used when absent.
    pub endpoint: Option<String>,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self { api_key: "SIMKEY".into(), endpoint: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EmailTransportConfig {
    /// One file per message under `<out>/alerts`.
    File,
    Smtp { addr: String, from: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmailConfig {
    pub to: String,
    pub transport: EmailTransportConfig,
}

impl Default for EmailConfig {
    fn default() -> Self {
        Self { to: "caregiver@example.org".into(), transport: EmailTransportConfig::File }
    }
}

/// A command injected as if sent from the dashboard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedCommand {
    pub t: f64,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub world: WorldConfig,
    #[serde(default)]
    pub user: UserProfile,
    #[serde(default)]
    pub ultrasonic: UltrasonicModel,
    /// No glove is worn when absent.
    #[serde(default = "some_default")]
    pub glove: Option<GloveConfig>,
    #[serde(default)]
    pub base: BaseConfig,
    #[serde(default)]
    pub hub: HubConfig,
    #[serde(default)]
    pub monitor: MonitorConfig,
    /// The camera path is off when absent.
    #[serde(default = "some_default")]
    pub perception: Option<PerceptionConfig>,
    #[serde(default)]
    pub cloud: CloudConfig,
    #[serde(default)]
    pub email: EmailConfig,
    #[serde(default)]
    pub dashboard_commands: Vec<ScriptedCommand>,
}

fn some_default<T: Default>() -> Option<T> {
    Some(T::default())
}

impl ScenarioConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            source_name: source_name.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate(source_name)?;
        Ok(cfg)
    }

    /// A bundled scenario name or a path to a JSON file.
    pub fn load(name_or_path: &str) -> Result<Self, ConfigError> {
        if let Some((name, text)) = BUNDLED.iter().find(|(n, _)| *n == name_or_path) {
            return Self::parse(text, name);
        }
        let path = Path::new(name_or_path);
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, name_or_path)
    }

    pub fn validate(&self, source_name: &str) -> Result<(), ConfigError> {
        let invalid = |field: &str, message: String| ConfigError::Invalid {
            source_name: source_name.to_string(),
            field: field.to_string(),
            message,
        };
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("duration_s", "must be positive".into()));
        }
        let p = self.world.start_pose;
        if ![p.x, p.y, p.heading].iter().all(|v| v.is_finite()) {
            return Err(invalid("world.start_pose", "must be finite".into()));
        }
        wheelsim_core::world::WorldState::new(
            self.world.start_pose,
            self.world.chair,
            self.world.obstacles.clone(),
            self.world.objects.clone(),
            self.seed,
        )
        .map_err(|e| invalid("world", e.to_string()))?;
        self.user.validate().map_err(|e| invalid("user", e.to_string()))?;
        self.ultrasonic.validate().map_err(|e| invalid("ultrasonic", e.to_string()))?;
        if let Some(g) = &self.glove {
            g.thresholds.validate().map_err(|e| invalid("glove.thresholds", e.to_string()))?;
            if g.calibration_samples == 0 {
                return Err(invalid("glove.calibration_samples", "must be at least 1".into()));
            }
            if g.cadence_ms == 0 || g.cadence_ms % 10 != 0 {
                return Err(invalid("glove.cadence_ms", "must be a positive multiple of 10".into()));
            }
        }
        if !(self.base.safety_threshold_cm > 0.0) {
            return Err(invalid("base.safety_threshold_cm", "must be positive".into()));
        }
        if self.base.tick_ms == 0 || !self.base.tick_ms.is_multiple_of(10) {
            return Err(invalid("base.tick_ms", "must be a positive multiple of 10".into()));
        }
        if self.hub.cadence_ms == 0 || !self.hub.cadence_ms.is_multiple_of(10) {
            return Err(invalid("hub.cadence_ms", "must be a positive multiple of 10".into()));
        }
        if !(0.0..=1.0).contains(&self.hub.corruption_probability) {
            return Err(invalid("hub.corruption_probability", "must be in [0, 1]".into()));
        }
        self.monitor.validate().map_err(|e| invalid("monitor", e))?;
        if self.monitor.loop_period_ms != 10 {
            return Err(invalid("monitor.loop_period_ms", "the runtime steps at 10 ms".into()));
        }
        if let Some(pc) = &self.perception {
            if pc.camera.frame_period_ms == 0 || pc.camera.frame_period_ms % 10 != 0 {
                return Err(invalid("perception.camera.frame_period_ms", "must be a positive multiple of 10".into()));
            }
            if !(pc.camera.fov_deg > 0.0 && pc.camera.fov_deg <= 180.0 && pc.camera.range_m > 0.0) {
                return Err(invalid("perception.camera", "fov in (0, 180] and positive range required".into()));
            }
            if let Some(d) = &pc.detector {
                d.validate().map_err(|e| invalid("perception.detector", e.to_string()))?;
            }
            if !(0.0..=1.0).contains(&pc.confidence_threshold) {
                return Err(invalid("perception.confidence_threshold", "must be in [0, 1]".into()));
            }
            if !(pc.cooldown_s > 0.0) {
                return Err(invalid("perception.cooldown_s", "must be positive".into()));
            }
        }
        if self.cloud.api_key.is_empty() {
            return Err(invalid("cloud.api_key", "must not be empty".into()));
        }
        if let Some(c) = self.dashboard_commands.iter().find(|c| !(c.t >= 0.0 && c.t.is_finite())) {
            return Err(invalid("dashboard_commands", format!("bad time {}", c.t)));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        for (name, _) in BUNDLED {
            let c = ScenarioConfig::load(name).unwrap();
            assert_eq!(&c.name, name);
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let text = r#"{"name": "x", "duration_s": 1, "world": {}, "colour": 3}"#;
        let e = ScenarioConfig::parse(text, "t.json").unwrap_err();
        assert_eq!(e.field(), Some("colour"));
        assert!(matches!(e, ConfigError::Parse { line: 1, .. }));
    }

    #[test]
    fn nested_unknown_key_reports_line() {
        let text = "{\n  \"name\": \"x\",\n  \"duration_s\": 1,\n  \"world\": {},\n  \"base\": {\"tick\": 100}\n}";
        let e = ScenarioConfig::parse(text, "t.json").unwrap_err();
        assert_eq!(e.field(), Some("tick"));
        assert!(matches!(e, ConfigError::Parse { line: 5, .. }), "{e}");
    }

    #[test]
    fn invalid_value_is_named() {
        let text = r#"{"name": "x", "duration_s": -1, "world": {}}"#;
        let e = ScenarioConfig::parse(text, "t.json").unwrap_err();
        assert_eq!(e.field(), Some("duration_s"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ScenarioConfig::load("idle").unwrap();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed += 1;
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
