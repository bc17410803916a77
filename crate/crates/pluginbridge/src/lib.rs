//! Plugins run as child processes and speak line-delimited frames (see
//! [`rlframe_core::wire`]) over stdin/stdout. A plugin may serve an
//! environment, a learner, network configurations, or any mix of these.
//!
//! * [`PluginEnvironment`] makes a plugin environment look native.
//! * [`RemoteLearner`] forwards training and evaluation to a plugin.
//! * [`extract_configuration`] fetches a configuration document and parses
//!   it like a local one.

mod environment;
pub mod mirror;
mod learner;
mod registry;
mod session;

use thiserror::Error;

pub use environment::{convert_environment, PluginEnvironment};
pub use learner::{configuration_document, extract_configuration, extract_learner, RemoteLearner};
pub use registry::{Capability, PluginDescriptor, PluginRegistry, REGISTRY_ENV};
pub use session::{Handshake, PluginSession, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum PluginError {
    #[error("could not start plugin `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("handshake failed: {0}")]
    HandshakeFailed(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("plugin error [{code}]: {message}")]
    Remote { code: String, message: String },
    #[error("no answer to `{method}` within {timeout_ms} ms")]
    Timeout { method: String, timeout_ms: u64 },
    #[error("unknown remote algorithm `{name}`; plugin offers: {}", advertised.join(", "))]
    UnknownRemoteAlgorithm { name: String, advertised: Vec<String> },
    #[error("plugin does not offer the `{0}` capability")]
    MissingCapability(String),
    #[error("plugin registry: {0}")]
    Registry(String),
    #[error(transparent)]
    Config(#[from] rlframe_core::net::NetError),
    #[error(transparent)]
    Wire(#[from] rlframe_core::wire::WireError),
}
