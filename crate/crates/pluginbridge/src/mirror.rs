//! Reference plugin: a mirror GridWorld, a uniformly random learner, and two
//! sample network configurations, served over stdin/stdout.
//!
//! The grid rules are an independent implementation, not a proxy for the
//! native environment.

use std::io::{self, BufRead, Write};
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use rlframe_core::env::{EnvDescriptor, State};
use rlframe_core::wire::{self, ErrorCode, Frame, FrameKind, WireError};

use crate::session::PROTOCOL_VERSION;

pub const ALGORITHMS: [&str; 1] = ["random"];
pub const CONFIGURATIONS: [&str; 2] = ["cartpole_actor", "cartpole_actor_broken"];

const WIDTH: i64 = 4;
const HEIGHT: i64 = 4;
const HORIZON: u64 = 100;
const MOVES: [(i64, i64); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

const CARTPOLE_ACTOR: &str = r#"{
  "schema_version": 1,
  "name": "cartpole_actor",
  "seed": 0,
  "layers": [
    { "type": "dense", "in": 4, "out": 16, "activation": "relu" },
    { "type": "dense", "in": 16, "out": 2, "activation": "softmax" }
  ],
  "loss": { "kind": "cross_entropy" },
  "optimizer": { "kind": "adam", "learning_rate": 0.001 }
}"#;

const CARTPOLE_ACTOR_BROKEN: &str = r#"{
  "schema_version": 1,
  "name": "cartpole_actor_broken",
  "seed": 0,
  "layers": [
    { "type": "dense", "in": 4, "out": 16, "activation": "relu" },
    { "type": "dense", "in": 8, "out": 2, "activation": "softmax" }
  ],
  "loss": { "kind": "cross_entropy" },
  "optimizer": { "kind": "adam", "learning_rate": 0.001 }
}"#;

/// Fault injection and version settings, mostly for tests.
#[derive(Debug, Clone, Copy)]
pub struct MirrorOptions {
    /// Only this protocol version is accepted at handshake.
    pub protocol_version: u32,
    /// Exit abruptly upon receiving this many `step` requests.
    pub exit_after_steps: Option<u64>,
    /// Stop answering upon receiving this many `step` requests.
    pub stall_after_steps: Option<u64>,
}

impl Default for MirrorOptions {
    fn default() -> Self {
        Self {
            protocol_version: PROTOCOL_VERSION,
            exit_after_steps: None,
            stall_after_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Grid {
    x: i64,
    y: i64,
    steps: u64,
    done: bool,
}

impl Grid {
    fn start() -> Self {
        Self {
            x: 0,
            y: 0,
            steps: 0,
            done: false,
        }
    }

    /// Applies one move and returns the reward.
    fn advance(&mut self, action: usize) -> f64 {
        let (dx, dy) = MOVES[action];
        self.x = (self.x + dx).clamp(0, WIDTH - 1);
        self.y = (self.y + dy).clamp(0, HEIGHT - 1);
        self.steps += 1;
        let goal = self.x == WIDTH - 1 && self.y == HEIGHT - 1;
        self.done = goal || self.steps >= HORIZON;
        if goal {
            1.0
        } else {
            0.0
        }
    }

    fn observation(&self) -> State {
        let index = (self.y * WIDTH + self.x) as usize;
        let mut values = vec![0.0; (WIDTH * HEIGHT) as usize];
        values[index] = 1.0;
        State {
            values,
            agent_index: 0,
            discrete: Some(index),
        }
    }
}

fn descriptor() -> EnvDescriptor {
    EnvDescriptor {
        num_agents: 1,
        num_objectives: 1,
        action_space: vec![MOVES.len()],
        state_dim: (WIDTH * HEIGHT) as usize,
        fully_observable: true,
        deterministic: true,
        discrete_states: Some((WIDTH * HEIGHT) as usize),
        max_steps: HORIZON as usize,
    }
}

/// Plays one random episode, asking `budget` before each move; returns
/// `(return, length, finished)`.
fn random_episode(rng: &mut ChaCha8Rng, mut budget: impl FnMut() -> bool) -> (f64, u64, bool) {
    let mut grid = Grid::start();
    let mut total = 0.0;
    while !grid.done {
        if !budget() {
            return (total, grid.steps, false);
        }
        total += grid.advance(rng.gen_range(0..MOVES.len()));
    }
    (total, grid.steps, true)
}

struct Failure {
    code: ErrorCode,
    message: String,
}

impl Failure {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<WireError> for Failure {
    fn from(e: WireError) -> Self {
        Self::new(ErrorCode::InvalidParams, e.to_string())
    }
}

enum Flow {
    Continue,
    Exit,
    Stall,
}

struct Server<W: Write> {
    out: W,
    options: MirrorOptions,
    handshaken: bool,
    grid: Grid,
    rng: ChaCha8Rng,
    step_requests: u64,
}

impl<W: Write> Server<W> {
    fn send(&mut self, frame: &Frame) -> io::Result<()> {
        writeln!(self.out, "{}", frame.encode())?;
        self.out.flush()
    }

    fn handle(&mut self, frame: &Frame) -> Result<(Value, Flow), Failure> {
        let p = &frame.payload;
        if frame.method != "handshake" && !self.handshaken {
            return Err(Failure::new(ErrorCode::InvalidParams, "handshake required first"));
        }
        let reply = match frame.method.as_str() {
            "handshake" => {
                let version = wire::field_u64(p, "protocol_version")?;
                if version != u64::from(self.options.protocol_version) {
                    return Err(Failure::new(
                        ErrorCode::UnsupportedVersion,
                        format!("only protocol version {} is supported", self.options.protocol_version),
                    ));
                }
                self.rng = ChaCha8Rng::seed_from_u64(wire::field_u64(p, "seed")?);
                self.handshaken = true;
                json!({
                    "protocol_version": self.options.protocol_version,
                    "capabilities": ["environment", "learner", "configuration"],
                    "descriptor": wire::encode_descriptor(&descriptor()),
                    "algorithms": ALGORITHMS,
                    "configurations": CONFIGURATIONS,
                })
            }
            "descriptor" => json!({ "descriptor": wire::encode_descriptor(&descriptor()) }),
            "reset" => {
                self.grid = Grid::start();
                json!({})
            }
            "step" => {
                self.step_requests += 1;
                if self.options.exit_after_steps == Some(self.step_requests) {
                    return Ok((json!({}), Flow::Exit));
                }
                if self.options.stall_after_steps == Some(self.step_requests) {
                    return Ok((json!({}), Flow::Stall));
                }
                let actions = wire::field_usizes(p, "actions")?;
                if self.grid.done {
                    return Err(Failure::new(ErrorCode::StepAfterTerminal, "episode is over"));
                }
                match actions.as_slice() {
                    [a] if *a < MOVES.len() => {
                        let r = self.grid.advance(*a);
                        json!({ "rewards": wire::encode_f64s(&[r]) })
                    }
                    _ => {
                        return Err(Failure::new(
                            ErrorCode::InvalidAction,
                            format!("expected one action in [0, {}), got {actions:?}", MOVES.len()),
                        ))
                    }
                }
            }
            "get_state" => json!({ "states": wire::encode_states(&[self.grid.observation()]) }),
            "is_terminal" => json!({ "terminal": self.grid.done }),
            "train" => {
                let algorithm = wire::field_str(p, "algorithm")?;
                if !ALGORITHMS.contains(&algorithm) {
                    return Err(Failure::new(ErrorCode::UnknownAlgorithm, algorithm));
                }
                let steps = wire::field_u64(p, "steps")?;
                let max_episodes = match p.get("max_episodes") {
                    None | Some(Value::Null) => u64::MAX,
                    Some(_) => wire::field_u64(p, "max_episodes")?,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(wire::field_u64(p, "seed")?);
                let (mut used, mut episodes) = (0u64, 0u64);
                while used < steps && episodes < max_episodes {
                    let (ret, length, finished) = random_episode(&mut rng, || {
                        used += 1;
                        used <= steps
                    });
                    if !finished {
                        used = steps;
                        break;
                    }
                    episodes += 1;
                    let note = Frame::notification(
                        "progress",
                        json!({ "returns": wire::encode_f64s(&[ret]), "length": length }),
                    );
                    self.send(&note)
                        .map_err(|e| Failure::new(ErrorCode::Internal, e.to_string()))?;
                }
                json!({ "total_steps": used, "episodes": episodes })
            }
            "evaluate" => {
                let n = wire::field_u64(p, "episodes")?;
                let mut rng = ChaCha8Rng::seed_from_u64(wire::field_u64(p, "seed")?);
                let episodes: Vec<Value> = (0..n)
                    .map(|_| {
                        let (ret, length, _) = random_episode(&mut rng, || true);
                        json!({ "returns": wire::encode_f64s(&[ret]), "length": length })
                    })
                    .collect();
                json!({ "episodes": episodes })
            }
            "act" => {
                wire::decode_f64s(wire::field(p, "state")?, "state")?;
                json!({ "action": self.rng.gen_range(0..MOVES.len()) })
            }
            "get_config" => {
                let document = match wire::field_str(p, "name")? {
                    "cartpole_actor" => CARTPOLE_ACTOR,
                    "cartpole_actor_broken" => CARTPOLE_ACTOR_BROKEN,
                    other => {
                        return Err(Failure::new(
                            ErrorCode::InvalidParams,
                            format!("no configuration named `{other}`"),
                        ))
                    }
                };
                json!({ "document": document })
            }
            other => {
                return Err(Failure::new(ErrorCode::UnknownMethod, format!("unknown method `{other}`")))
            }
        };
        Ok((reply, Flow::Continue))
    }
}

/// Answers frames from `input` on `output` until end of input.
pub fn serve(input: impl BufRead, output: impl Write, options: MirrorOptions) -> io::Result<()> {
    let mut server = Server {
        out: output,
        options,
        handshaken: false,
        grid: Grid::start(),
        rng: ChaCha8Rng::seed_from_u64(0),
        step_requests: 0,
    };
    let mut input = input;
    let mut line = Vec::new();
    loop {
        line.clear();
        if input.read_until(b'\n', &mut line)? == 0 {
            return Ok(());
        }
        let frame = match Frame::decode_bytes(&line) {
            Ok(f) if f.kind == FrameKind::Request => f,
            Ok(f) => {
                let e = Frame::error(f.id, &f.method, ErrorCode::BadFrame, "only requests are accepted");
                server.send(&e)?;
                continue;
            }
            Err(e) => {
                server.send(&Frame::error(0, "invalid", ErrorCode::BadFrame, &e.to_string()))?;
                continue;
            }
        };
        match server.handle(&frame) {
            Ok((_, Flow::Exit)) => std::process::exit(3),
            Ok((_, Flow::Stall)) => loop {
                thread::sleep(Duration::from_secs(3600));
            },
            Ok((payload, Flow::Continue)) => {
                server.send(&Frame::response(frame.id, &frame.method, payload))?
            }
            Err(f) => server.send(&Frame::error(frame.id, &frame.method, f.code, &f.message))?,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exchange(requests: &[Frame]) -> Vec<Frame> {
        let input: String = requests.iter().map(|f| f.encode() + "\n").collect();
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out, MirrorOptions::default()).unwrap();
        String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| Frame::decode(l).unwrap())
            .collect()
    }

    fn handshake() -> Frame {
        Frame::request(1, "handshake", json!({ "protocol_version": 1, "seed": 3 }))
    }

    #[test]
    fn grid_rules_match_examples() {
        let mut g = Grid::start();
        assert_eq!(g.advance(3), 0.0);
        assert_eq!((g.x, g.y, g.done), (1, 0, false));
        let mut g = Grid { x: 2, y: 3, steps: 0, done: false };
        assert_eq!(g.advance(3), 1.0);
        assert_eq!((g.x, g.y, g.done), (3, 3, true));
    }

    #[test]
    fn unknown_method_keeps_session_alive() {
        let replies = exchange(&[
            handshake(),
            Frame::request(2, "foo", json!({})),
            Frame::request(3, "is_terminal", json!({})),
        ]);
        assert_eq!(replies.len(), 3);
        assert_eq!(replies[1].error_parts().unwrap().0, "unknown_method");
        assert_eq!(replies[2].payload, json!({ "terminal": false }));
    }

    #[test]
    fn garbage_yields_bad_frame_errors() {
        let mut out = Vec::new();
        let input = b"not json\n\xff\xfe\n{\"id\":1}\n".to_vec();
        serve(&input[..], &mut out, MirrorOptions::default()).unwrap();
        let replies: Vec<Frame> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| Frame::decode(l).unwrap())
            .collect();
        assert_eq!(replies.len(), 3);
        assert!(replies.iter().all(|f| f.error_parts().unwrap().0 == "bad_frame"));
    }

    #[test]
    fn requests_before_handshake_are_refused() {
        let replies = exchange(&[Frame::request(1, "reset", json!({}))]);
        assert_eq!(replies[0].kind, FrameKind::Error);
    }

    #[test]
    fn training_streams_one_progress_note_per_episode() {
        let replies = exchange(&[
            handshake(),
            Frame::request(
                2,
                "train",
                json!({ "algorithm": "random", "steps": 1000, "max_episodes": 3, "seed": 1 }),
            ),
        ]);
        let notes = replies.iter().filter(|f| f.kind == FrameKind::Notification).count();
        assert_eq!(notes, 3);
        let last = replies.last().unwrap();
        assert_eq!(last.kind, FrameKind::Response);
        assert_eq!(last.payload["episodes"], json!(3));
    }
}
