//! Declarative network configuration documents.
//!
//! A configuration is a JSON document:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "actor",
//!   "seed": 7,
//!   "layers": [
//!     {"type": "dense", "in": 4, "out": 16, "activation": "relu"},
//!     {"type": "dense", "in": 16, "out": 2, "activation": "softmax"}
//!   ],
//!   "loss": {"kind": "cross_entropy"},
//!   "optimizer": {"kind": "adam", "learning_rate": 0.001}
//! }
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use super::NetError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
            Activation::Softmax => "softmax",
        }
    }

    fn parse(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "linear" => Some(Activation::Linear),
            "softmax" => Some(Activation::Softmax),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Mse,
    CrossEntropy,
    /// Policy-gradient term weighted by a fixed advantage, plus
    /// `value_coef` times the squared value error of the paired critic,
    /// minus `entropy_coef` times the policy entropy.
    A3cComposite { value_coef: f64, entropy_coef: f64 },
}

impl Loss {
    pub fn name(&self) -> &'static str {
        match self {
            Loss::Mse => "mse",
            Loss::CrossEntropy => "cross_entropy",
            Loss::A3cComposite { .. } => "a3c_composite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Rescale the gradient of this network to at most this global norm.
    pub max_grad_norm: Option<f64>,
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            max_grad_norm: None,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
            },
            learning_rate,
            max_grad_norm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub name: String,
    pub seed: u64,
    pub layers: Vec<DenseLayer>,
    pub loss: Loss,
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    layers: Vec<RawLayer>,
    loss: RawLoss,
    optimizer: RawOptimizer,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    #[serde(rename = "type")]
    kind: String,
    #[serde(rename = "in")]
    in_dim: usize,
    #[serde(rename = "out")]
    out_dim: usize,
    activation: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoss {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value_coef: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entropy_coef: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    kind: String,
    learning_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_grad_norm: Option<f64>,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> NetError {
    NetError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<NetworkConfig, NetError> {
    let raw: RawConfig =
        serde_json::from_str(text).map_err(|e| NetError::Parse(e.to_string()))?;
    let config = from_raw(raw)?;
    config.validate()?;
    Ok(config)
}

fn from_raw(raw: RawConfig) -> Result<NetworkConfig, NetError> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(invalid(
            "schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema_version),
        ));
    }
    let mut layers = Vec::with_capacity(raw.layers.len());
    for (i, layer) in raw.layers.iter().enumerate() {
        if layer.kind != "dense" {
            return Err(invalid(
                format!("layers[{i}].type"),
                format!("unknown layer type `{}`", layer.kind),
            ));
        }
        let activation = Activation::parse(&layer.activation).ok_or_else(|| {
            invalid(
                format!("layers[{i}].activation"),
                format!("unknown activation `{}`", layer.activation),
            )
        })?;
        layers.push(DenseLayer {
            in_dim: layer.in_dim,
            out_dim: layer.out_dim,
            activation,
        });
    }
    let loss = match raw.loss.kind.as_str() {
        "mse" => Loss::Mse,
        "cross_entropy" => Loss::CrossEntropy,
        "a3c_composite" => Loss::A3cComposite {
            value_coef: raw.loss.value_coef.unwrap_or(0.5),
            entropy_coef: raw.loss.entropy_coef.unwrap_or(0.01),
        },
        other => return Err(invalid("loss.kind", format!("unknown loss `{other}`"))),
    };
    let kind = match raw.optimizer.kind.as_str() {
        "sgd" => OptimizerKind::Sgd,
        "adam" => OptimizerKind::Adam {
            beta1: raw.optimizer.beta1.unwrap_or(0.9),
            beta2: raw.optimizer.beta2.unwrap_or(0.999),
            epsilon: raw.optimizer.epsilon.unwrap_or(1e-8),
        },
        other => {
            return Err(invalid(
                "optimizer.kind",
                format!("unknown optimizer `{other}`"),
            ))
        }
    };
    Ok(NetworkConfig {
        name: raw.name.unwrap_or_else(|| "network".to_string()),
        seed: raw.seed.unwrap_or(0),
        layers,
        loss,
        optimizer: OptimizerConfig {
            kind,
            learning_rate: raw.optimizer.learning_rate,
            max_grad_norm: raw.optimizer.max_grad_norm,
        },
    })
}

impl NetworkConfig {
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn head(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.layers.is_empty() {
            return Err(invalid("layers", "at least one layer is required"));
        }
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_dim == 0 {
                return Err(invalid(format!("layers[{i}].in"), "must be positive"));
            }
            if layer.out_dim == 0 {
                return Err(invalid(format!("layers[{i}].out"), "must be positive"));
            }
            if i > 0 && layer.in_dim != self.layers[i - 1].out_dim {
                return Err(invalid(
                    format!("layers[{i}].in"),
                    format!(
                        "expected {} to chain with layers[{}].out, found {}",
                        self.layers[i - 1].out_dim,
                        i - 1,
                        layer.in_dim
                    ),
                ));
            }
            if layer.activation == Activation::Softmax && i != last {
                return Err(invalid(
                    format!("layers[{i}].activation"),
                    "softmax is only allowed on the final layer",
                ));
            }
        }
        match self.loss {
            Loss::CrossEntropy | Loss::A3cComposite { .. } if self.head() != Activation::Softmax => {
                return Err(invalid(
                    "loss.kind",
                    format!("`{}` requires a softmax head", self.loss.name()),
                ));
            }
            Loss::A3cComposite {
                value_coef,
                entropy_coef,
            } => {
                if !(value_coef.is_finite() && value_coef >= 0.0) {
                    return Err(invalid("loss.value_coef", "must be finite and >= 0"));
                }
                if !(entropy_coef.is_finite() && entropy_coef >= 0.0) {
                    return Err(invalid("loss.entropy_coef", "must be finite and >= 0"));
                }
            }
            _ => {}
        }
        let lr = self.optimizer.learning_rate;
        if !(lr.is_finite() && lr > 0.0) {
            return Err(invalid("optimizer.learning_rate", "must be finite and > 0"));
        }
        if let OptimizerKind::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer.kind
        {
            if !(0.0..1.0).contains(&beta1) {
                return Err(invalid("optimizer.beta1", "must be in [0, 1)"));
            }
            if !(0.0..1.0).contains(&beta2) {
                return Err(invalid("optimizer.beta2", "must be in [0, 1)"));
            }
            if !(epsilon.is_finite() && epsilon > 0.0) {
                return Err(invalid("optimizer.epsilon", "must be finite and > 0"));
            }
        }
        if let Some(norm) = self.optimizer.max_grad_norm {
            if !(norm.is_finite() && norm > 0.0) {
                return Err(invalid("optimizer.max_grad_norm", "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Serializes back to a configuration document.
    pub fn to_document(&self) -> String {
        let (value_coef, entropy_coef) = match self.loss {
            Loss::A3cComposite {
                value_coef,
                entropy_coef,
            } => (Some(value_coef), Some(entropy_coef)),
            _ => (None, None),
        };
        let (kind, beta1, beta2, epsilon) = match self.optimizer.kind {
            OptimizerKind::Sgd => ("sgd", None, None, None),
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => ("adam", Some(beta1), Some(beta2), Some(epsilon)),
        };
        let raw = RawConfig {
            schema_version: SCHEMA_VERSION,
            name: Some(self.name.clone()),
            seed: Some(self.seed),
            layers: self
                .layers
                .iter()
                .map(|l| RawLayer {
                    kind: "dense".into(),
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    activation: l.activation.name().into(),
                })
                .collect(),
            loss: RawLoss {
                kind: self.loss.name().into(),
                value_coef,
                entropy_coef,
            },
            optimizer: RawOptimizer {
                kind: kind.into(),
                learning_rate: self.optimizer.learning_rate,
                beta1,
                beta2,
                epsilon,
                max_grad_norm: self.optimizer.max_grad_norm,
            },
        };
        serde_json::to_string_pretty(&raw).expect("config serializes")
    }

    /// Architecture fingerprint used by checkpoints: layer chain, loss kind,
    /// and optimizer kind. Seeds and learning rates are excluded.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        for l in &self.layers {
            s.push_str(&format!("dense:{}:{}:{};", l.in_dim, l.out_dim, l.activation));
        }
        s.push_str(&format!("loss:{};", self.loss.name()));
        let opt = match self.optimizer.kind {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam { .. } => "adam",
        };
        s.push_str(&format!("opt:{opt}"));
        s
    }
}
