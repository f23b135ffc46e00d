//! Scenario configuration: JSON blocks `robot`, `controller`, `profile`,
//! `sim` and `output`, layered as built-in defaults < config file <
//! `--set key=value` overrides.

use std::path::{Path, PathBuf};

use hopwheel::{
    builtin_profiles, ControllerConfig64, ReferenceProfile64, RobotParams64, SimConfig64,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Syntax(String),
    #[error("invalid config: {0}")]
    Schema(String),
    #[error("invalid value for `{key}`: {reason}")]
    Value { key: String, reason: String },
    #[error("bad override `{0}` (expected KEY=VALUE)")]
    Override(String),
    #[error("unknown profile `{0}` (expected vertical or horizontal)")]
    UnknownProfile(String),
}

impl ConfigError {
    fn value(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Value {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

/// Robot block as written in a file: `I_o` defaults to the thin-hoop value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotBlock {
    pub m_o: f64,
    pub m_p: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub l_p: f64,
    #[serde(rename = "I_o", default)]
    pub i_o: Option<f64>,
    pub g: f64,
    pub tau_max: f64,
    pub mu: f64,
    pub kv: f64,
}

impl Default for RobotBlock {
    fn default() -> Self {
        let p = RobotParams64::default();
        Self {
            m_o: p.m_o,
            m_p: p.m_p,
            radius: p.radius,
            l_p: p.l_p,
            i_o: None,
            g: p.g,
            tau_max: p.tau_max,
            mu: p.mu,
            kv: p.kv,
        }
    }
}

/// Controller block; `tau_max` defaults to the robot's motor limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerBlock {
    pub kp: f64,
    #[serde(default)]
    pub tau_max: Option<f64>,
    pub saturation_enabled: bool,
}

impl Default for ControllerBlock {
    fn default() -> Self {
        let c = ControllerConfig64::default();
        Self {
            kp: c.kp,
            tau_max: None,
            saturation_enabled: c.saturation_enabled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub trajectory_csv: bool,
    pub metrics_json: bool,
    pub diagnostics_json: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            trajectory_csv: true,
            metrics_json: true,
            diagnostics_json: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    robot: RobotBlock,
    controller: ControllerBlock,
    profile: ReferenceProfile64,
    sim: SimConfig64,
    output: OutputConfig,
}

/// Fully resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub robot: RobotParams64,
    pub controller: ControllerConfig64,
    pub profile: ReferenceProfile64,
    pub sim: SimConfig64,
    pub output: OutputConfig,
}

impl ScenarioConfig {
    /// Effective configuration as JSON; parsing it back yields `self`.
    pub fn to_json(&self) -> Value {
        let r = &self.robot;
        let raw = RawConfig {
            robot: RobotBlock {
                m_o: r.m_o,
                m_p: r.m_p,
                radius: r.radius,
                l_p: r.l_p,
                i_o: Some(r.i_o),
                g: r.g,
                tau_max: r.tau_max,
                mu: r.mu,
                kv: r.kv,
            },
            controller: ControllerBlock {
                kp: self.controller.kp,
                tau_max: Some(self.controller.tau_max),
                saturation_enabled: self.controller.saturation_enabled,
            },
            profile: self.profile.clone(),
            sim: self.sim,
            output: self.output.clone(),
        };
        serde_json::to_value(raw).expect("config serializes")
    }
}

/// Default document for a named scenario (`None` = vertical).
pub fn default_document(scenario: Option<&str>) -> Result<Value, ConfigError> {
    let name = scenario.unwrap_or("vertical");
    let profile = builtin_profiles::<f64>()
        .remove(name)
        .ok_or_else(|| ConfigError::UnknownProfile(name.to_string()))?;
    let raw = RawConfig {
        robot: RobotBlock::default(),
        controller: ControllerBlock::default(),
        profile,
        sim: SimConfig64::default(),
        output: OutputConfig::default(),
    };
    Ok(serde_json::to_value(raw).expect("defaults serialize"))
}

/// Recursively overlays `top` onto `base`; objects merge, everything else
/// replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Replaces a builtin profile name by its inline segment list.
fn expand_profile(doc: &mut Value) -> Result<(), ConfigError> {
    if let Some(Value::String(name)) = doc.get("profile") {
        let profile = builtin_profiles::<f64>()
            .remove(name.as_str())
            .ok_or_else(|| ConfigError::UnknownProfile(name.clone()))?;
        doc["profile"] = serde_json::to_value(profile).expect("profile serializes");
    }
    Ok(())
}

/// Sets a dotted path (`controller.kp`, `profile.segments.2.value`). The
/// value is parsed as JSON when possible, otherwise taken as a string.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<(), ConfigError> {
    if key.is_empty() {
        return Err(ConfigError::Override(format!("{key}={raw}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    if key.starts_with("profile.") {
        expand_profile(doc)?;
    }
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| ConfigError::value(key, format!("`{part}` is not an index")))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| ConfigError::value(key, format!("index {idx} out of range")))?
            }
            Value::Object(map) => {
                if last {
                    map.insert((*part).to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()))
            }
            _ => return Err(ConfigError::value(key, "path runs through a non-container value")),
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    Ok(())
}

/// Parses an `KEY=VALUE` override.
pub fn split_override(arg: &str) -> Result<(&str, &str), ConfigError> {
    arg.split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| ConfigError::Override(arg.to_string()))
}

/// Builds the merged document from defaults, an optional file and overrides.
pub fn load_document(
    path: Option<&Path>,
    scenario: Option<&str>,
    overrides: &[String],
) -> Result<Value, ConfigError> {
    let mut doc = default_document(scenario)?;
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        if !file.is_object() {
            return Err(ConfigError::Schema("top level must be an object".into()));
        }
        // a file without a profile keeps the scenario's
        merge(&mut doc, file);
    }
    for arg in overrides {
        let (k, v) = split_override(arg)?;
        apply_override(&mut doc, k, v)?;
    }
    Ok(doc)
}

/// Validates a merged document into a runnable scenario.
pub fn resolve(mut doc: Value) -> Result<ScenarioConfig, ConfigError> {
    expand_profile(&mut doc)?;
    let raw: RawConfig = serde_json::from_value(doc).map_err(|e| ConfigError::Schema(e.to_string()))?;
    let b = raw.robot;
    let robot = RobotParams64 {
        m_o: b.m_o,
        m_p: b.m_p,
        radius: b.radius,
        l_p: b.l_p,
        i_o: b.i_o.unwrap_or(b.m_o * b.radius * b.radius),
        g: b.g,
        tau_max: b.tau_max,
        mu: b.mu,
        kv: b.kv,
    };
    robot.validate().map_err(|e| match e {
        hopwheel::ModelError::InvalidParam { name, value, reason } => {
            ConfigError::value(format!("robot.{name}"), format!("{value} {reason}"))
        }
        other => ConfigError::Schema(other.to_string()),
    })?;
    let controller = ControllerConfig64 {
        kp: raw.controller.kp,
        tau_max: raw.controller.tau_max.unwrap_or(robot.tau_max),
        saturation_enabled: raw.controller.saturation_enabled,
    };
    controller
        .validate()
        .map_err(|k| ConfigError::value(format!("controller.{k}"), "must be finite and > 0"))?;
    raw.sim
        .validate()
        .map_err(|k| ConfigError::value(format!("sim.{k}"), "out of range"))?;
    raw.profile
        .validate()
        .map_err(|e| ConfigError::value("profile", e.to_string()))?;
    Ok(ScenarioConfig {
        robot,
        controller,
        profile: raw.profile,
        sim: raw.sim,
        output: raw.output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_resolve() {
        let cfg = resolve(default_document(None).unwrap()).unwrap();
        assert_eq!(cfg.robot, RobotParams64::default());
        assert_eq!(cfg.controller, ControllerConfig64::default());
        assert_eq!(cfg.profile, ReferenceProfile64::vertical());
        let h = resolve(default_document(Some("horizontal")).unwrap()).unwrap();
        assert_eq!(h.profile, ReferenceProfile64::horizontal());
        assert!(matches!(default_document(Some("sideways")), Err(ConfigError::UnknownProfile(_))));
    }

    #[test]
    fn negative_mass_names_key() {
        let mut doc = default_document(None).unwrap();
        apply_override(&mut doc, "robot.m_o", "-0.4").unwrap();
        let err = resolve(doc).unwrap_err();
        assert!(err.to_string().contains("robot.m_o"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut doc = default_document(None).unwrap();
        merge(&mut doc, json!({"robot": {"mass": 1.0}}));
        let err = resolve(doc).unwrap_err().to_string();
        assert!(err.contains("mass"), "{err}");
        let mut doc = default_document(None).unwrap();
        apply_override(&mut doc, "colour", "red").unwrap();
        assert!(resolve(doc).unwrap_err().to_string().contains("colour"));
    }

    #[test]
    fn inertia_tracks_mass_unless_given() {
        let mut doc = default_document(None).unwrap();
        apply_override(&mut doc, "robot.m_o", "1.0").unwrap();
        let cfg = resolve(doc.clone()).unwrap();
        assert_eq!(cfg.robot.i_o, 0.076 * 0.076);
        apply_override(&mut doc, "robot.I_o", "0.001").unwrap();
        assert_eq!(resolve(doc).unwrap().robot.i_o, 0.001);
    }

    #[test]
    fn override_into_builtin_profile() {
        let mut doc = default_document(None).unwrap();
        doc["profile"] = json!("vertical");
        apply_override(&mut doc, "profile.segments.2.value", "150").unwrap();
        let cfg = resolve(doc).unwrap();
        assert_eq!(cfg.profile.eval(6.0), 150.0);
        let mut doc = default_document(None).unwrap();
        assert!(apply_override(&mut doc, "profile.segments.9.value", "1").is_err());
    }

    #[test]
    fn named_profile_in_file_and_string_values() {
        let mut doc = default_document(None).unwrap();
        merge(&mut doc, json!({"profile": "horizontal"}));
        apply_override(&mut doc, "output.dir", "results/run1").unwrap();
        let cfg = resolve(doc).unwrap();
        assert_eq!(cfg.profile, ReferenceProfile64::horizontal());
        assert_eq!(cfg.output.dir, PathBuf::from("results/run1"));
    }

    #[test]
    fn controller_limit_defaults_to_robot() {
        let mut doc = default_document(None).unwrap();
        apply_override(&mut doc, "robot.tau_max", "0.5").unwrap();
        assert_eq!(resolve(doc).unwrap().controller.tau_max, 0.5);
    }

    #[test]
    fn dump_round_trips() {
        let mut doc = default_document(Some("horizontal")).unwrap();
        apply_override(&mut doc, "controller.kp", "0.07").unwrap();
        apply_override(&mut doc, "sim.dt", "2e-4").unwrap();
        let cfg = resolve(doc).unwrap();
        let text = serde_json::to_string_pretty(&cfg.to_json()).unwrap();
        let back = resolve(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn malformed_overrides() {
        assert!(split_override("novalue").is_err());
        assert!(split_override("=3").is_err());
        assert_eq!(split_override("a.b=1=2").unwrap(), ("a.b", "1=2"));
    }
}
