//! Human players inside an environment.
//!
//! A [`HumanEnvironment`] wraps any environment that supports human slots.
//! Learners keep calling the ordinary environment methods; the wrapper
//! swaps in the human's latest command for every attached agent and
//! publishes a [`Snapshot`] after each tick. [`serve`] exposes the slots
//! and snapshots to browser clients over a WebSocket.

mod environment;
mod server;
mod slot;
mod snapshot;

use thiserror::Error;

pub use environment::{HumanEnvironment, DEFAULT_TICK_RATE};
pub use server::{serve, ServerConfig, ServerHandle};
pub use slot::HumanSlot;
pub use snapshot::{Broadcaster, Snapshot, EPISODE_END, SNAPSHOT};

#[derive(Debug, Error)]
pub enum HumanError {
    #[error("environment does not accept human players")]
    UnsupportedEnvironment,
    #[error("agent {0} already has a human slot")]
    SlotTaken(usize),
    #[error("agent {agent} does not exist; the environment has {agents}")]
    InvalidAgent { agent: usize, agents: usize },
    #[error("default action {action} outside [0, {limit})")]
    InvalidDefault { action: usize, limit: usize },
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
