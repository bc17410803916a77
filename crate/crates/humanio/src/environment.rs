use std::thread;
use std::time::{Duration, Instant};

use rlframe_core::env::{
    ActionVector, EnvDescriptor, EnvError, Environment, GridRender, RewardVector, State,
};

use crate::slot::HumanSlot;
use crate::snapshot::{grid_rows, Broadcaster, Snapshot};
use crate::HumanError;

/// Ticks per second once a human is attached.
pub const DEFAULT_TICK_RATE: f64 = 10.0;

/// Environment wrapper that injects human commands into attached agents'
/// actions and publishes a snapshot after every step.
///
/// Whatever action the caller passes for a human agent is ignored.
pub struct HumanEnvironment {
    inner: Box<dyn Environment>,
    slots: Vec<HumanSlot>,
    broadcaster: Broadcaster,
    tick: u64,
    episode: u64,
    scores: Vec<f64>,
    tick_period: Option<Duration>,
    last_tick: Option<Instant>,
    pacing_overridden: bool,
}

impl std::fmt::Debug for HumanEnvironment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HumanEnvironment")
            .field("inner", &self.inner)
            .field("slots", &self.slots)
            .field("tick", &self.tick)
            .field("episode", &self.episode)
            .finish()
    }
}

impl HumanEnvironment {
    pub fn new(inner: Box<dyn Environment>) -> Self {
        let m = inner.get_number_of_objectives();
        Self {
            inner,
            slots: Vec::new(),
            broadcaster: Broadcaster::default(),
            tick: 0,
            episode: 0,
            scores: vec![0.0; m],
            tick_period: None,
            last_tick: None,
            pacing_overridden: false,
        }
    }

    /// Hands control of `agent_index` to a person. Unless pacing was set
    /// explicitly, the wrapper starts running at [`DEFAULT_TICK_RATE`].
    pub fn attach_human(&mut self, agent_index: usize, default_action: usize) -> Result<HumanSlot, HumanError> {
        if !self.inner.supports_human_slots() {
            return Err(HumanError::UnsupportedEnvironment);
        }
        let desc = self.inner.descriptor();
        if agent_index >= desc.num_agents {
            return Err(HumanError::InvalidAgent {
                agent: agent_index,
                agents: desc.num_agents,
            });
        }
        let limit = desc.action_space[agent_index];
        if default_action >= limit {
            return Err(HumanError::InvalidDefault {
                action: default_action,
                limit,
            });
        }
        if self.slots.iter().any(|s| s.agent_index() == agent_index) {
            return Err(HumanError::SlotTaken(agent_index));
        }
        let slot = HumanSlot::new(agent_index, default_action, limit);
        self.slots.push(slot.clone());
        if !self.pacing_overridden {
            self.tick_period = Some(Duration::from_secs_f64(1.0 / DEFAULT_TICK_RATE));
        }
        Ok(slot)
    }

    /// Sets the tick rate; `None` runs unthrottled.
    pub fn set_tick_rate(&mut self, ticks_per_second: Option<f64>) {
        self.pacing_overridden = true;
        self.tick_period = ticks_per_second.map(|hz| Duration::from_secs_f64(1.0 / hz));
    }

    pub fn slots(&self) -> &[HumanSlot] {
        &self.slots
    }

    pub fn slot(&self, agent_index: usize) -> Option<&HumanSlot> {
        self.slots.iter().find(|s| s.agent_index() == agent_index)
    }

    pub fn broadcaster(&self) -> Broadcaster {
        self.broadcaster.clone()
    }

    /// Ticks taken over all episodes.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn inner(&self) -> &dyn Environment {
        self.inner.as_ref()
    }

    fn pace(&mut self) {
        if let (Some(period), Some(last)) = (self.tick_period, self.last_tick) {
            let due = last + period;
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        self.last_tick = Some(Instant::now());
    }

    fn snapshot(&mut self, rewards: &RewardVector) -> Result<Snapshot, EnvError> {
        let humans = self.human_agents();
        let grid = self.inner.render().map(|r| grid_rows(&r, &humans)).unwrap_or_default();
        Ok(Snapshot {
            tick: self.tick,
            episode: self.episode,
            step: self.inner.elapsed_steps() as u64,
            states: self.inner.get_state()?,
            rewards: rewards.0.clone(),
            scores: self.scores.clone(),
            terminal: self.inner.is_terminal()?,
            grid,
            humans,
        })
    }
}

impl Environment for HumanEnvironment {
    fn descriptor(&self) -> &EnvDescriptor {
        self.inner.descriptor()
    }

    /// Clones the wrapped environment only: copies have no human slots.
    fn clone_env(&mut self) -> Result<Box<dyn Environment>, EnvError> {
        self.inner.clone_env()
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        self.inner.reset()?;
        self.episode += 1;
        self.scores.iter_mut().for_each(|s| *s = 0.0);
        Ok(())
    }

    fn step(&mut self, actions: &ActionVector) -> Result<RewardVector, EnvError> {
        self.pace();
        let mut resolved = actions.clone();
        let tick = self.tick + 1;
        for slot in &self.slots {
            if let Some(a) = resolved.0.get_mut(slot.agent_index()) {
                *a = slot.resolve(tick);
            }
        }
        let rewards = self.inner.step(&resolved)?;
        self.tick = tick;
        for (s, r) in self.scores.iter_mut().zip(rewards.as_slice()) {
            *s += r;
        }
        if self.broadcaster.subscriber_count() > 0 {
            let snapshot = self.snapshot(&rewards)?;
            self.broadcaster.publish(&snapshot.to_frame());
            if snapshot.terminal {
                self.broadcaster.publish(&snapshot.episode_end_frame());
            }
        }
        Ok(rewards)
    }

    fn get_state(&mut self) -> Result<Vec<State>, EnvError> {
        self.inner.get_state()
    }

    fn is_terminal(&mut self) -> Result<bool, EnvError> {
        self.inner.is_terminal()
    }

    fn elapsed_steps(&self) -> usize {
        self.inner.elapsed_steps()
    }

    fn supports_human_slots(&self) -> bool {
        self.inner.supports_human_slots()
    }

    fn human_agents(&self) -> Vec<usize> {
        let mut agents: Vec<usize> = self.slots.iter().map(HumanSlot::agent_index).collect();
        agents.sort_unstable();
        agents
    }

    fn render(&self) -> Option<GridRender> {
        self.inner.render()
    }
}
