//! Per-tick snapshots and their fan-out to connected clients.

use std::sync::mpsc::{SyncSender, TrySendError};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};

use rlframe_core::env::{GridCell, GridRender, State};
use rlframe_core::wire::{self, Frame};

/// Notification method of per-tick snapshots.
pub const SNAPSHOT: &str = "snapshot";
/// Notification method of the summary sent when an episode ends.
pub const EPISODE_END: &str = "episode_end";

/// What a human client sees after one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Strictly increasing over the life of the environment.
    pub tick: u64,
    pub episode: u64,
    /// Steps since the episode began.
    pub step: u64,
    pub states: Vec<State>,
    pub rewards: Vec<f64>,
    /// Episode return per objective so far.
    pub scores: Vec<f64>,
    pub terminal: bool,
    /// One string per row: `.` empty, `A` AI tank, `H` human tank, `E`
    /// enemy, `*` shot trace. Empty for environments without a render.
    pub grid: Vec<String>,
    pub humans: Vec<usize>,
}

pub fn grid_rows(render: &GridRender, humans: &[usize]) -> Vec<String> {
    render
        .cells
        .chunks(render.width)
        .map(|row| {
            row.iter()
                .map(|c| match c {
                    GridCell::Empty => '.',
                    GridCell::Friendly(i) if humans.contains(i) => 'H',
                    GridCell::Friendly(_) => 'A',
                    GridCell::Enemy => 'E',
                    GridCell::Trace => '*',
                })
                .collect()
        })
        .collect()
}

impl Snapshot {
    pub fn payload(&self) -> Value {
        json!({
            "tick": self.tick,
            "episode": self.episode,
            "step": self.step,
            "states": wire::encode_states(&self.states),
            "rewards": wire::encode_f64s(&self.rewards),
            "scores": wire::encode_f64s(&self.scores),
            "terminal": self.terminal,
            "grid": self.grid,
            "humans": self.humans,
        })
    }

    pub fn to_frame(&self) -> Frame {
        Frame::notification(SNAPSHOT, self.payload())
    }

    pub fn from_payload(p: &Value) -> Result<Self, wire::WireError> {
        let strings = |name: &str| -> Result<Vec<String>, wire::WireError> {
            serde_json::from_value(wire::field(p, name)?.clone()).map_err(|e| wire::WireError::Payload {
                field: name.to_string(),
                message: e.to_string(),
            })
        };
        Ok(Self {
            tick: wire::field_u64(p, "tick")?,
            episode: wire::field_u64(p, "episode")?,
            step: wire::field_u64(p, "step")?,
            states: wire::decode_states(wire::field(p, "states")?)?,
            rewards: wire::decode_f64s(wire::field(p, "rewards")?, "rewards")?,
            scores: wire::decode_f64s(wire::field(p, "scores")?, "scores")?,
            terminal: wire::field_bool(p, "terminal")?,
            grid: strings("grid")?,
            humans: wire::field_usizes(p, "humans")?,
        })
    }

    /// Summary frame for the end of an episode.
    pub fn episode_end_frame(&self) -> Frame {
        Frame::notification(
            EPISODE_END,
            json!({ "episode": self.episode, "length": self.step, "scores": wire::encode_f64s(&self.scores) }),
        )
    }
}

/// Fans encoded frames out to subscribers through bounded queues. A full
/// queue loses the frame; a closed one is removed.
#[derive(Debug, Clone, Default)]
pub struct Broadcaster {
    subscribers: Arc<Mutex<Vec<SyncSender<Arc<str>>>>>,
}

impl Broadcaster {
    pub fn subscribe(&self, sender: SyncSender<Arc<str>>) {
        self.subscribers.lock().unwrap_or_else(|e| e.into_inner()).push(sender);
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// Returns how many subscribers received the frame.
    pub fn publish(&self, frame: &Frame) -> usize {
        let mut subs = self.subscribers.lock().unwrap_or_else(|e| e.into_inner());
        if subs.is_empty() {
            return 0;
        }
        let line: Arc<str> = frame.encode().into();
        let mut delivered = 0;
        subs.retain(|s| match s.try_send(Arc::clone(&line)) {
            Ok(()) => {
                delivered += 1;
                true
            }
            Err(TrySendError::Full(_)) => true,
            Err(TrySendError::Disconnected(_)) => false,
        });
        delivered
    }
}
