//! Line-delimited JSON frames shared by the plugin protocol and the human
//! play socket.
//!
//! A frame is one JSON object on one line:
//! `{"id": <u64>, "kind": "request"|"response"|"error"|"notification",
//! "method": <string>, "payload": <object>}`. Floating-point numbers inside
//! payloads travel as decimal strings with 17 significant digits so that
//! every `f64` survives the trip bit for bit.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::env::{EnvDescriptor, RewardVector, State};

/// Longest accepted frame, in bytes.
pub const MAX_FRAME_BYTES: usize = 16 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Request,
    Response,
    Error,
    /// Unsolicited message; its id is 0 and it answers nothing.
    Notification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub id: u64,
    pub kind: FrameKind,
    pub method: String,
    #[serde(default = "empty_payload")]
    pub payload: Value,
}

fn empty_payload() -> Value {
    Value::Object(Map::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownMethod,
    BadFrame,
    InvalidParams,
    InvalidAction,
    StepAfterTerminal,
    UnknownAlgorithm,
    UnsupportedVersion,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::UnknownMethod => "unknown_method",
            Self::BadFrame => "bad_frame",
            Self::InvalidParams => "invalid_params",
            Self::InvalidAction => "invalid_action",
            Self::StepAfterTerminal => "step_after_terminal",
            Self::UnknownAlgorithm => "unknown_algorithm",
            Self::UnsupportedVersion => "unsupported_version",
            Self::Internal => "internal",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("bad frame: {0}")]
    BadFrame(String),
    #[error("payload field `{field}`: {message}")]
    Payload { field: String, message: String },
}

fn payload_err(field: &str, message: impl Into<String>) -> WireError {
    WireError::Payload {
        field: field.to_string(),
        message: message.into(),
    }
}

impl Frame {
    pub fn request(id: u64, method: &str, payload: Value) -> Self {
        Self {
            id,
            kind: FrameKind::Request,
            method: method.to_string(),
            payload,
        }
    }

    pub fn response(id: u64, method: &str, payload: Value) -> Self {
        Self {
            id,
            kind: FrameKind::Response,
            method: method.to_string(),
            payload,
        }
    }

    pub fn error(id: u64, method: &str, code: ErrorCode, message: &str) -> Self {
        Self {
            id,
            kind: FrameKind::Error,
            method: method.to_string(),
            payload: json!({ "code": code, "message": message }),
        }
    }

    pub fn notification(method: &str, payload: Value) -> Self {
        Self {
            id: 0,
            kind: FrameKind::Notification,
            method: method.to_string(),
            payload,
        }
    }

    /// Code and message of an error frame.
    pub fn error_parts(&self) -> Option<(String, String)> {
        if self.kind != FrameKind::Error {
            return None;
        }
        let code = self.payload.get("code")?.as_str()?.to_string();
        let message = self
            .payload
            .get("message")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        Some((code, message))
    }

    /// One line of JSON without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("frames always serialize")
    }

    /// Parses one line (a trailing `\r\n` or `\n` is ignored). Never panics.
    pub fn decode(line: &str) -> Result<Self, WireError> {
        if line.len() > MAX_FRAME_BYTES {
            return Err(WireError::BadFrame(format!("frame of {} bytes exceeds limit", line.len())));
        }
        let line = line.trim_end_matches(['\n', '\r']);
        if line.contains('\n') {
            return Err(WireError::BadFrame("embedded newline".into()));
        }
        let frame: Frame = serde_json::from_str(line).map_err(|e| WireError::BadFrame(e.to_string()))?;
        if !frame.payload.is_object() {
            return Err(WireError::BadFrame("payload must be an object".into()));
        }
        if frame.method.is_empty() {
            return Err(WireError::BadFrame("empty method".into()));
        }
        Ok(frame)
    }

    /// Decodes raw bytes, rejecting invalid UTF-8.
    pub fn decode_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let text = std::str::from_utf8(bytes).map_err(|e| WireError::BadFrame(e.to_string()))?;
        Self::decode(text)
    }
}

/// `f64` as a 17-significant-digit decimal string.
pub fn encode_f64(x: f64) -> Value {
    Value::String(format!("{x:.16e}"))
}

pub fn decode_f64(v: &Value, field: &str) -> Result<f64, WireError> {
    v.as_str()
        .ok_or_else(|| payload_err(field, "expected a decimal string"))?
        .parse::<f64>()
        .map_err(|e| payload_err(field, e.to_string()))
}

pub fn encode_f64s(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| encode_f64(x)).collect())
}

pub fn decode_f64s(v: &Value, field: &str) -> Result<Vec<f64>, WireError> {
    v.as_array()
        .ok_or_else(|| payload_err(field, "expected an array"))?
        .iter()
        .map(|x| decode_f64(x, field))
        .collect()
}

/// Looks up `field` in an object payload.
pub fn field<'a>(payload: &'a Value, field: &str) -> Result<&'a Value, WireError> {
    payload.get(field).ok_or_else(|| payload_err(field, "missing"))
}

pub fn field_u64(payload: &Value, name: &str) -> Result<u64, WireError> {
    field(payload, name)?
        .as_u64()
        .ok_or_else(|| payload_err(name, "expected a non-negative integer"))
}

pub fn field_bool(payload: &Value, name: &str) -> Result<bool, WireError> {
    field(payload, name)?
        .as_bool()
        .ok_or_else(|| payload_err(name, "expected a boolean"))
}

pub fn field_str<'a>(payload: &'a Value, name: &str) -> Result<&'a str, WireError> {
    field(payload, name)?
        .as_str()
        .ok_or_else(|| payload_err(name, "expected a string"))
}

pub fn field_usizes(payload: &Value, name: &str) -> Result<Vec<usize>, WireError> {
    field(payload, name)?
        .as_array()
        .ok_or_else(|| payload_err(name, "expected an array"))?
        .iter()
        .map(|v| {
            v.as_u64()
                .and_then(|n| usize::try_from(n).ok())
                .ok_or_else(|| payload_err(name, "expected non-negative integers"))
        })
        .collect()
}

pub fn encode_descriptor(d: &EnvDescriptor) -> Value {
    json!({
        "num_agents": d.num_agents,
        "num_objectives": d.num_objectives,
        "action_space": d.action_space,
        "state_dim": d.state_dim,
        "fully_observable": d.fully_observable,
        "deterministic": d.deterministic,
        "discrete_states": d.discrete_states,
        "max_steps": d.max_steps,
    })
}

pub fn decode_descriptor(v: &Value) -> Result<EnvDescriptor, WireError> {
    let usize_of = |name: &str| -> Result<usize, WireError> {
        usize::try_from(field_u64(v, name)?).map_err(|_| payload_err(name, "out of range"))
    };
    let discrete_states = match v.get("discrete_states") {
        None | Some(Value::Null) => None,
        Some(x) => Some(
            x.as_u64()
                .and_then(|n| usize::try_from(n).ok())
                .ok_or_else(|| payload_err("discrete_states", "expected an integer or null"))?,
        ),
    };
    let d = EnvDescriptor {
        num_agents: usize_of("num_agents")?,
        num_objectives: usize_of("num_objectives")?,
        action_space: field_usizes(v, "action_space")?,
        state_dim: usize_of("state_dim")?,
        fully_observable: field_bool(v, "fully_observable")?,
        deterministic: field_bool(v, "deterministic")?,
        discrete_states,
        max_steps: usize_of("max_steps")?,
    };
    d.validate().map_err(|e| payload_err("descriptor", e.to_string()))?;
    Ok(d)
}

pub fn encode_states(states: &[State]) -> Value {
    Value::Array(
        states
            .iter()
            .map(|s| {
                json!({
                    "values": encode_f64s(&s.values),
                    "agent_index": s.agent_index,
                    "discrete": s.discrete,
                })
            })
            .collect(),
    )
}

pub fn decode_states(v: &Value) -> Result<Vec<State>, WireError> {
    v.as_array()
        .ok_or_else(|| payload_err("states", "expected an array"))?
        .iter()
        .map(|s| {
            let discrete = match s.get("discrete") {
                None | Some(Value::Null) => None,
                Some(x) => Some(
                    x.as_u64()
                        .and_then(|n| usize::try_from(n).ok())
                        .ok_or_else(|| payload_err("states.discrete", "expected an integer or null"))?,
                ),
            };
            Ok(State {
                values: decode_f64s(field(s, "values")?, "states.values")?,
                agent_index: usize::try_from(field_u64(s, "agent_index")?)
                    .map_err(|_| payload_err("states.agent_index", "out of range"))?,
                discrete,
            })
        })
        .collect()
}

pub fn encode_rewards(r: &RewardVector) -> Value {
    encode_f64s(r.as_slice())
}
