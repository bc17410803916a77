//! Declarative dense networks: configuration documents, a policy-network
//! wrapper with manual backpropagation, optimizers, and checkpoints.

pub mod checkpoint;
mod config;
mod data;
mod dense;
mod network;
mod optim;

use std::sync::{Arc, RwLock};

use thiserror::Error;

pub use config::{
    parse_config, Activation, DenseLayer, Loss, NetworkConfig, OptimizerConfig, OptimizerKind,
    SCHEMA_VERSION,
};
pub use data::{keys, DataDict, Matrix};
pub use dense::{log_softmax, softmax_in_place, Tensor};
pub use network::{Gradients, PolicyNetwork};
pub use optim::OptimizerState;

/// A network shared between learner threads. Predictions take the read
/// lock; updates take the write lock.
pub type SharedNetwork = Arc<RwLock<PolicyNetwork>>;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("missing data key `{0}`")]
    MissingKey(String),
    #[error("checkpoint does not match network: {0}")]
    ShapeMismatch(String),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
