//! Run manifests: one TOML file describing an environment, a learner and
//! its training budget.
//!
//! ```toml
//! output_dir = "runs/grid"
//!
//! [env]
//! name = "gridworld"
//!
//! [learner]
//! algorithm = "q_learning"
//! gamma = 0.9
//!
//! [monitor]
//! max_episodes = 5000
//! ```
//!
//! Exactly one of `learner.algorithm` and a `[plugin]` table must be
//! present. Neural algorithms list their network configuration files under
//! `network`, actor first.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rlframe_core::env::EnvParams;
use rlframe_core::learn::{is_neural, ALGORITHMS, LearnError, LearnerSpec, MonitorSpec};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("manifest parse error: {0}")]
    Parse(String),
    #[error("invalid manifest at `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ManifestError {
    ManifestError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    /// Built-in environment name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Registry name of a plugin serving the environment instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plugin: Option<String>,
    #[serde(default, skip_serializing_if = "EnvParams::is_empty")]
    pub params: EnvParams,
}

/// A learner living in a plugin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PluginSection {
    pub name: String,
    pub algorithm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HumanSection {
    pub agent: usize,
    pub default_action: usize,
    pub tick_rate: f64,
    pub host: String,
    pub port: u16,
}

impl Default for HumanSection {
    fn default() -> Self {
        Self {
            agent: 0,
            default_action: 0,
            tick_rate: rlframe_humanio::DEFAULT_TICK_RATE,
            host: "127.0.0.1".into(),
            port: 8765,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Network configuration documents, actor first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub network: Vec<PathBuf>,
    pub env: EnvSection,
    #[serde(default)]
    pub learner: LearnerSpec,
    #[serde(default)]
    pub monitor: MonitorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plugin: Option<PluginSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human: Option<HumanSection>,
}

fn spec_error(e: LearnError) -> ManifestError {
    match e {
        LearnError::SpecValidation { field, message } => ManifestError::Invalid { field, message },
        other => invalid("learner", other.to_string()),
    }
}

impl RunManifest {
    /// Parses and validates manifest text. Relative paths stay relative.
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let raw: toml::Table = toml::from_str(text).map_err(|e| ManifestError::Parse(e.to_string()))?;
        let has_algorithm = raw
            .get("learner")
            .and_then(toml::Value::as_table)
            .is_some_and(|t| t.contains_key("algorithm"));
        match (has_algorithm, raw.contains_key("plugin")) {
            (true, true) => {
                return Err(invalid(
                    "plugin",
                    "`learner.algorithm` and `[plugin]` are mutually exclusive; choose a native or a plugin learner",
                ))
            }
            (false, false) => {
                return Err(invalid("learner.algorithm", "set a native algorithm or a `[plugin]` learner"))
            }
            _ => {}
        }
        let mut manifest: RunManifest =
            toml::from_str(text).map_err(|e| ManifestError::Parse(e.to_string()))?;
        if let Some(p) = &manifest.plugin {
            manifest.learner.algorithm = p.algorithm.clone();
        }
        manifest.validate()?;
        Ok(manifest)
    }

    /// Reads a manifest and resolves its relative paths against the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut manifest.network {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = &mut manifest.output_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        match (&self.env.name, &self.env.plugin) {
            (Some(_), Some(_)) => return Err(invalid("env", "set either `name` or `plugin`, not both")),
            (None, None) => return Err(invalid("env.name", "missing")),
            _ => {}
        }
        self.monitor.validate().map_err(spec_error)?;
        if self.plugin.is_some() {
            if !self.network.is_empty() {
                return Err(invalid("network", "plugin learners bring their own networks"));
            }
            return Ok(());
        }
        if !ALGORITHMS.contains(&self.learner.algorithm.as_str()) {
            return Err(invalid(
                "learner.algorithm",
                format!("unknown algorithm `{}`; registered: {}", self.learner.algorithm, ALGORITHMS.join(", ")),
            ));
        }
        self.learner.validate().map_err(spec_error)?;
        let neural = is_neural(&self.learner.algorithm);
        if neural && self.network.is_empty() {
            return Err(invalid(
                "network",
                format!("`{}` needs network configuration files", self.learner.algorithm),
            ));
        }
        if !neural && !self.network.is_empty() {
            return Err(invalid(
                "network",
                format!("`{}` is tabular and takes no network", self.learner.algorithm),
            ));
        }
        if let Some(h) = &self.human {
            if !(h.tick_rate.is_finite() && h.tick_rate > 0.0) {
                return Err(invalid("human.tick_rate", "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Serializes back to manifest text that [`RunManifest::parse`] accepts.
    pub fn to_toml(&self) -> String {
        let mut value = toml::Table::try_from(self).expect("manifest serializes");
        if self.plugin.is_some() {
            if let Some(toml::Value::Table(learner)) = value.get_mut("learner") {
                learner.remove("algorithm");
            }
        }
        toml::to_string(&value).expect("manifest serializes")
    }

    /// Sets every seed in the manifest to `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.learner.seed = seed;
        self.env
            .params
            .insert("seed".into(), rlframe_core::env::ParamValue::Int(seed as i64));
    }

    /// Environment seed: the explicit parameter, else the learner seed.
    pub fn env_seed(&self) -> u64 {
        match self.env.params.get("seed") {
            Some(rlframe_core::env::ParamValue::Int(s)) if *s >= 0 => *s as u64,
            _ => self.learner.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: &str = r#"
output_dir = "runs/grid"

[env]
name = "gridworld"
params = { horizon = 100 }

[learner]
algorithm = "q_learning"
gamma = 0.9
seed = 4

[learner.epsilon]
start = 1.0
end = 0.05
decay_steps = 20000

[monitor]
max_episodes = 5000
steps_per_epoch = 1000000
"#;

    #[test]
    fn parses_and_round_trips() {
        let m = RunManifest::parse(GRID).unwrap();
        assert_eq!(m.learner.gamma, 0.9);
        assert_eq!(m.monitor.max_episodes, Some(5000));
        assert_eq!(m.env_seed(), 4);
        assert_eq!(RunManifest::parse(&m.to_toml()).unwrap(), m);
    }

    #[test]
    fn plugin_manifest_round_trips() {
        let text = "[env]\nplugin = \"refplugin\"\n\n[plugin]\nname = \"refplugin\"\nalgorithm = \"random\"\n";
        let m = RunManifest::parse(text).unwrap();
        assert_eq!(m.learner.algorithm, "random");
        assert_eq!(RunManifest::parse(&m.to_toml()).unwrap(), m);
    }

    #[test]
    fn algorithm_and_plugin_conflict() {
        let text = format!("{GRID}\n[plugin]\nname = \"refplugin\"\nalgorithm = \"random\"\n");
        match RunManifest::parse(&text) {
            Err(ManifestError::Invalid { field, message }) => {
                assert_eq!(field, "plugin");
                assert!(message.contains("mutually exclusive"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_names_fields() {
        let cases = [
            (GRID.replace("gamma = 0.9", "gamma = 1.5"), "learner.gamma"),
            (GRID.replace("algorithm = \"q_learning\"", "algorithm = \"a3c\""), "network"),
            (GRID.replace("name = \"gridworld\"", ""), "env.name"),
            (GRID.replace("\"q_learning\"", "\"sarsa\""), "learner.algorithm"),
            (GRID.replace("[learner]\nalgorithm = \"q_learning\"", "[learner]"), "learner.algorithm"),
        ];
        for (text, field) in cases {
            match RunManifest::parse(&text) {
                Err(ManifestError::Invalid { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{field}: {other:?}"),
            }
        }
        assert!(matches!(
            RunManifest::parse(&GRID.replace("gamma", "gama")),
            Err(ManifestError::Parse(_))
        ));
    }

    #[test]
    fn seed_override_reaches_env_and_learner() {
        let mut m = RunManifest::parse(GRID).unwrap();
        m.override_seed(77);
        assert_eq!((m.learner.seed, m.env_seed()), (77, 77));
    }
}
