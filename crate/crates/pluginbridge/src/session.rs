//! One child process speaking the frame protocol over stdin/stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use rlframe_core::env::EnvDescriptor;
use rlframe_core::wire::{self, ErrorCode, Frame, FrameKind};

use crate::registry::{Capability, PluginDescriptor};
use crate::PluginError;

pub const PROTOCOL_VERSION: u32 = 1;

/// What the plugin announced in its handshake response.
#[derive(Debug, Clone, PartialEq)]
pub struct Handshake {
    pub protocol_version: u32,
    pub capabilities: Vec<Capability>,
    /// Present when the plugin serves an environment.
    pub descriptor: Option<EnvDescriptor>,
    pub algorithms: Vec<String>,
    pub configurations: Vec<String>,
}

impl Handshake {
    fn parse(payload: &Value) -> Result<Self, PluginError> {
        let protocol_version = wire::field_u64(payload, "protocol_version")? as u32;
        let capabilities: Vec<Capability> = serde_json::from_value(wire::field(payload, "capabilities")?.clone())
            .map_err(|e| PluginError::HandshakeFailed(format!("capabilities: {e}")))?;
        let descriptor = match payload.get("descriptor") {
            None | Some(Value::Null) => None,
            Some(d) => Some(wire::decode_descriptor(d)?),
        };
        let strings = |name: &str| -> Result<Vec<String>, PluginError> {
            match payload.get(name) {
                None => Ok(Vec::new()),
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| PluginError::HandshakeFailed(format!("{name}: {e}"))),
            }
        };
        Ok(Self {
            protocol_version,
            capabilities,
            descriptor,
            algorithms: strings("algorithms")?,
            configurations: strings("configurations")?,
        })
    }

    pub fn has(&self, capability: Capability) -> bool {
        self.capabilities.contains(&capability)
    }
}

/// A running plugin. Requests are strictly sequential; ids start at 1 and
/// are never reused.
pub struct PluginSession {
    name: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
    next_id: u64,
    timeout: Duration,
    handshake: Handshake,
}

impl std::fmt::Debug for PluginSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PluginSession")
            .field("name", &self.name)
            .field("pid", &self.child.id())
            .field("next_id", &self.next_id)
            .finish()
    }
}

impl PluginSession {
    /// Starts the plugin and performs the handshake, passing `seed` on.
    pub fn spawn(descriptor: &PluginDescriptor, seed: u64) -> Result<Self, PluginError> {
        descriptor.validate()?;
        let mut child = Command::new(&descriptor.command[0])
            .args(&descriptor.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| PluginError::Spawn {
                command: descriptor.command.join(" "),
                source,
            })?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::Builder::new()
            .name(format!("plugin-{}", descriptor.name))
            .spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    let Ok(line) = line else { break };
                    if tx.send(line).is_err() {
                        break;
                    }
                }
            })
            .map_err(|source| PluginError::Spawn {
                command: descriptor.command.join(" "),
                source,
            })?;
        let mut session = Self {
            name: descriptor.name.clone(),
            stdin: child.stdin.take(),
            child,
            lines,
            next_id: 1,
            timeout: Duration::from_millis(descriptor.timeout_ms),
            handshake: Handshake {
                protocol_version: descriptor.protocol_version,
                capabilities: Vec::new(),
                descriptor: None,
                algorithms: Vec::new(),
                configurations: Vec::new(),
            },
        };
        let payload = json!({ "protocol_version": descriptor.protocol_version, "seed": seed });
        let answer = session.request("handshake", payload).map_err(|e| match e {
            PluginError::Remote { code, message } => {
                PluginError::HandshakeFailed(format!("[{code}] {message}"))
            }
            other => PluginError::HandshakeFailed(other.to_string()),
        })?;
        let handshake = Handshake::parse(&answer).map_err(|e| match e {
            PluginError::HandshakeFailed(m) => PluginError::HandshakeFailed(m),
            other => PluginError::HandshakeFailed(other.to_string()),
        })?;
        if handshake.protocol_version != descriptor.protocol_version {
            return Err(PluginError::HandshakeFailed(format!(
                "plugin answered with protocol version {}, expected {}",
                handshake.protocol_version, descriptor.protocol_version
            )));
        }
        if let Some(missing) = descriptor.capabilities.iter().find(|c| !handshake.has(**c)) {
            return Err(PluginError::HandshakeFailed(format!(
                "registry declares `{}` but the plugin does not offer it",
                missing.as_str()
            )));
        }
        if handshake.has(Capability::Environment) && handshake.descriptor.is_none() {
            return Err(PluginError::HandshakeFailed(
                "environment capability without a descriptor".into(),
            ));
        }
        session.handshake = handshake;
        log::debug!("plugin `{}` ready (pid {})", session.name, session.child.id());
        Ok(session)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Id the next request will carry.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn require(&self, capability: Capability) -> Result<(), PluginError> {
        if self.handshake.has(capability) {
            Ok(())
        } else {
            Err(PluginError::MissingCapability(capability.as_str().to_string()))
        }
    }

    pub fn request(&mut self, method: &str, payload: Value) -> Result<Value, PluginError> {
        self.request_streaming(method, payload, |_| Ok(()))
    }

    /// Sends one request and waits for its answer, passing notifications
    /// that arrive in between to `on_notification`. The timeout bounds the
    /// silence between consecutive frames.
    pub fn request_streaming(
        &mut self,
        method: &str,
        payload: Value,
        mut on_notification: impl FnMut(&Frame) -> Result<(), PluginError>,
    ) -> Result<Value, PluginError> {
        let id = self.next_id;
        self.next_id += 1;
        let timed_out = || PluginError::Timeout {
            method: method.to_string(),
            timeout_ms: self.timeout.as_millis() as u64,
        };
        let line = Frame::request(id, method, payload).encode();
        let stdin = self.stdin.as_mut().ok_or_else(timed_out)?;
        if writeln!(stdin, "{line}").and_then(|_| stdin.flush()).is_err() {
            return Err(timed_out());
        }
        let mut deadline = Instant::now() + self.timeout;
        loop {
            let wait = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(wait) {
                Ok(line) => line,
                Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => {
                    return Err(timed_out())
                }
            };
            let frame = Frame::decode(&line)
                .map_err(|e| PluginError::Protocol(format!("answer to `{method}`: {e}")))?;
            deadline = Instant::now() + self.timeout;
            match frame.kind {
                FrameKind::Notification => on_notification(&frame)?,
                FrameKind::Request => {
                    return Err(PluginError::Protocol(format!(
                        "plugin sent a request (`{}`) while `{method}` was pending",
                        frame.method
                    )))
                }
                FrameKind::Response | FrameKind::Error if frame.id != id => {
                    return Err(PluginError::Protocol(format!(
                        "answer id {} does not match request id {id}",
                        frame.id
                    )))
                }
                FrameKind::Response => return Ok(frame.payload),
                FrameKind::Error => {
                    let (code, message) = frame.error_parts().ok_or_else(|| {
                        PluginError::Protocol("error frame without a code".into())
                    })?;
                    return Err(PluginError::Remote { code, message });
                }
            }
        }
    }

    /// Terminates the child immediately.
    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for PluginSession {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            match self.child.try_wait() {
                Ok(Some(_)) | Err(_) => return,
                Ok(None) => thread::sleep(Duration::from_millis(5)),
            }
        }
        log::warn!("plugin `{}` ignored end of input; killing it", self.name);
        self.kill();
    }
}

/// True when a remote error carries `code`.
pub(crate) fn is_code(err: &PluginError, code: ErrorCode) -> bool {
    matches!(err, PluginError::Remote { code: c, .. } if c == code.as_str())
}
