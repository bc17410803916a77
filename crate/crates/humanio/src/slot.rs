use std::sync::{Arc, Mutex, MutexGuard};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Command {
    action: usize,
    /// Tick during which the command arrived.
    tick: u64,
}

#[derive(Debug, Default)]
struct Shared {
    latest: Option<Command>,
    /// Last tick resolved; commands arriving now are stamped with it.
    clock: u64,
}

/// One agent's human control channel. Clones share the same slot, so one
/// copy can sit with the episode loop and another with a network reader.
#[derive(Debug, Clone)]
pub struct HumanSlot {
    agent_index: usize,
    default_action: usize,
    action_limit: usize,
    shared: Arc<Mutex<Shared>>,
}

impl HumanSlot {
    pub(crate) fn new(agent_index: usize, default_action: usize, action_limit: usize) -> Self {
        Self {
            agent_index,
            default_action,
            action_limit,
            shared: Arc::default(),
        }
    }

    pub fn agent_index(&self) -> usize {
        self.agent_index
    }

    pub fn default_action(&self) -> usize {
        self.default_action
    }

    /// Number of actions the agent has.
    pub fn action_limit(&self) -> usize {
        self.action_limit
    }

    fn lock(&self) -> MutexGuard<'_, Shared> {
        self.shared.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Records a command now. A later command replaces an unconsumed one.
    pub fn submit(&self, action: usize) {
        let mut s = self.lock();
        let tick = s.clock;
        s.latest = Some(Command { action, tick });
    }

    /// Records a command as if it arrived during `tick`.
    pub fn submit_at(&self, action: usize, tick: u64) {
        self.lock().latest = Some(Command { action, tick });
    }

    /// Drops any pending command.
    pub fn clear(&self) {
        self.lock().latest = None;
    }

    /// Action for `tick`: the latest command that arrived before it, or the
    /// default. A command is used at most once.
    pub fn resolve(&self, tick: u64) -> usize {
        let mut s = self.lock();
        s.clock = s.clock.max(tick);
        match s.latest {
            Some(c) if c.tick < tick => {
                s.latest = None;
                c.action
            }
            _ => self.default_action,
        }
    }
}
