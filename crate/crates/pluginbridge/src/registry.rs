//! Plugin registry file: a TOML table mapping plugin names to command lines.
//!
//! ```toml
//! [plugins.refplugin]
//! command = ["/usr/local/bin/rlframe-mirror-plugin"]
//! capabilities = ["environment", "learner", "configuration"]
//! timeout_ms = 5000
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::session::PROTOCOL_VERSION;
use crate::PluginError;

/// Environment variable naming the default registry file.
pub const REGISTRY_ENV: &str = "RLFRAME_PLUGIN_REGISTRY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Environment,
    Learner,
    Configuration,
}

impl Capability {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Environment => "environment",
            Self::Learner => "learner",
            Self::Configuration => "configuration",
        }
    }
}

fn default_version() -> u32 {
    PROTOCOL_VERSION
}

fn default_timeout() -> u64 {
    5000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PluginDescriptor {
    #[serde(skip)]
    pub name: String,
    /// Program followed by its arguments.
    pub command: Vec<String>,
    #[serde(default = "default_version")]
    pub protocol_version: u32,
    pub capabilities: Vec<Capability>,
    /// Per-request answer deadline, handshake included.
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

impl PluginDescriptor {
    pub fn new(name: &str, command: Vec<String>, capabilities: Vec<Capability>) -> Self {
        Self {
            name: name.to_string(),
            command,
            protocol_version: PROTOCOL_VERSION,
            capabilities,
            timeout_ms: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), PluginError> {
        if self.command.is_empty() || self.command[0].is_empty() {
            return Err(PluginError::Registry(format!("plugin `{}` has an empty command", self.name)));
        }
        if self.capabilities.is_empty() {
            return Err(PluginError::Registry(format!("plugin `{}` declares no capabilities", self.name)));
        }
        if self.timeout_ms == 0 {
            return Err(PluginError::Registry(format!("plugin `{}` has a zero timeout", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default)]
    plugins: BTreeMap<String, PluginDescriptor>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PluginRegistry {
    plugins: BTreeMap<String, PluginDescriptor>,
}

impl PluginRegistry {
    pub fn parse(text: &str) -> Result<Self, PluginError> {
        let file: RegistryFile = toml::from_str(text).map_err(|e| PluginError::Registry(e.to_string()))?;
        let mut plugins = BTreeMap::new();
        for (name, mut d) in file.plugins {
            d.name = name.clone();
            d.validate()?;
            plugins.insert(name, d);
        }
        Ok(Self { plugins })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PluginError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PluginError::Registry(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Loads the file named by [`REGISTRY_ENV`], or an empty registry when
    /// the variable is unset.
    pub fn from_env() -> Result<Self, PluginError> {
        match std::env::var_os(REGISTRY_ENV) {
            Some(path) => Self::load(path),
            None => Ok(Self::default()),
        }
    }

    pub fn insert(&mut self, descriptor: PluginDescriptor) {
        self.plugins.insert(descriptor.name.clone(), descriptor);
    }

    pub fn get(&self, name: &str) -> Result<&PluginDescriptor, PluginError> {
        self.plugins.get(name).ok_or_else(|| {
            PluginError::Registry(format!(
                "no plugin named `{name}`; registered: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.plugins.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PluginDescriptor> {
        self.plugins.values()
    }
}
