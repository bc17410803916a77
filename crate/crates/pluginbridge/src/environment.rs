//! A plugin-served environment behind the native [`Environment`] contract.

use serde_json::json;

use rlframe_core::env::{
    check_actions, derive_seed, ActionVector, EnvDescriptor, EnvError, Environment, RewardVector,
    State,
};
use rlframe_core::wire::{self, ErrorCode};

use crate::registry::{Capability, PluginDescriptor};
use crate::session::{is_code, PluginSession};
use crate::PluginError;

/// Forwards every environment call to a plugin process. The descriptor is
/// fetched once at handshake; actions are validated locally before they
/// travel.
#[derive(Debug)]
pub struct PluginEnvironment {
    plugin: PluginDescriptor,
    session: PluginSession,
    desc: EnvDescriptor,
    seed: u64,
    clones: u64,
    steps: usize,
}

/// Starts `plugin` and wraps its environment.
pub fn convert_environment(plugin: &PluginDescriptor, seed: u64) -> Result<PluginEnvironment, PluginError> {
    PluginEnvironment::spawn(plugin, seed)
}

fn external(e: PluginError) -> EnvError {
    if is_code(&e, ErrorCode::StepAfterTerminal) {
        return EnvError::StepAfterTerminal;
    }
    EnvError::External(Box::new(e))
}

impl PluginEnvironment {
    pub fn spawn(plugin: &PluginDescriptor, seed: u64) -> Result<Self, PluginError> {
        let session = PluginSession::spawn(plugin, seed)?;
        session.require(Capability::Environment)?;
        let desc = session
            .handshake()
            .descriptor
            .clone()
            .expect("handshake guarantees a descriptor for environments");
        Ok(Self {
            plugin: plugin.clone(),
            session,
            desc,
            seed,
            clones: 0,
            steps: 0,
        })
    }

    pub fn session(&self) -> &PluginSession {
        &self.session
    }

    pub fn session_mut(&mut self) -> &mut PluginSession {
        &mut self.session
    }

    fn call(&mut self, method: &str, payload: serde_json::Value) -> Result<serde_json::Value, EnvError> {
        self.session.request(method, payload).map_err(external)
    }
}

impl Environment for PluginEnvironment {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.desc
    }

    /// Starts a fresh plugin process seeded from this one. The copy begins
    /// unreset: callers must `reset` it before stepping.
    fn clone_env(&mut self) -> Result<Box<dyn Environment>, EnvError> {
        let seed = derive_seed(self.seed, self.clones);
        self.clones += 1;
        let copy = Self::spawn(&self.plugin, seed).map_err(external)?;
        Ok(Box::new(copy))
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        self.call("reset", json!({}))?;
        self.steps = 0;
        Ok(())
    }

    fn step(&mut self, actions: &ActionVector) -> Result<RewardVector, EnvError> {
        check_actions(&self.desc, actions)?;
        let answer = self.call("step", json!({ "actions": actions.as_slice() }))?;
        let rewards = wire::field(&answer, "rewards")
            .and_then(|v| wire::decode_f64s(v, "rewards"))
            .map_err(|e| external(e.into()))?;
        if rewards.len() != self.desc.num_objectives {
            return Err(external(PluginError::Protocol(format!(
                "{} rewards for {} objectives",
                rewards.len(),
                self.desc.num_objectives
            ))));
        }
        self.steps += 1;
        Ok(RewardVector(rewards))
    }

    fn get_state(&mut self) -> Result<Vec<State>, EnvError> {
        let answer = self.call("get_state", json!({}))?;
        let states = wire::field(&answer, "states")
            .and_then(wire::decode_states)
            .map_err(|e| external(e.into()))?;
        if states.len() != self.desc.num_agents || states.iter().any(|s| s.values.len() != self.desc.state_dim) {
            return Err(external(PluginError::Protocol(
                "state shape disagrees with the descriptor".into(),
            )));
        }
        Ok(states)
    }

    fn is_terminal(&mut self) -> Result<bool, EnvError> {
        let answer = self.call("is_terminal", json!({}))?;
        wire::field_bool(&answer, "terminal").map_err(|e| external(e.into()))
    }

    fn elapsed_steps(&self) -> usize {
        self.steps
    }
}
