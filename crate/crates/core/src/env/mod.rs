//! Framework-facing environment contract and the built-in environments.
//!
//! Every environment hosts `N` agents and reports `M` objectives. A step
//! consumes one action per agent and returns one reward per objective.

mod cartpole;
mod gridworld;
mod mountain_car;
mod tank_battle;
mod wrappers;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cartpole::CartPole;
pub use gridworld::{GridAction, GridWorld};
pub use mountain_car::MountainCarMo;
pub use tank_battle::{TankAction, TankBattle};
pub use wrappers::SelectObjective;

/// Static metadata of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvDescriptor {
    pub num_agents: usize,
    pub num_objectives: usize,
    /// Discrete action count, one entry per agent.
    pub action_space: Vec<usize>,
    /// Observation length, identical for every agent.
    pub state_dim: usize,
    pub fully_observable: bool,
    pub deterministic: bool,
    /// Number of discrete state indices, when the environment exposes one.
    #[serde(default)]
    pub discrete_states: Option<usize>,
    pub max_steps: usize,
}

impl EnvDescriptor {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |key: &str, reason: &str| {
            Err(EnvError::InvalidParameter {
                key: key.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.num_agents == 0 {
            return bad("num_agents", "must be at least 1");
        }
        if self.num_objectives == 0 {
            return bad("num_objectives", "must be at least 1");
        }
        if self.action_space.len() != self.num_agents {
            return bad("action_space", "needs one entry per agent");
        }
        if self.action_space.contains(&0) {
            return bad("action_space", "every agent needs at least one action");
        }
        if self.state_dim == 0 {
            return bad("state_dim", "must be at least 1");
        }
        Ok(())
    }
}

/// One agent's observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub values: Vec<f64>,
    pub agent_index: usize,
    /// Tabular index of the observation, for environments that have one.
    #[serde(default)]
    pub discrete: Option<usize>,
}

/// One action per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionVector(pub Vec<usize>);

impl ActionVector {
    pub fn single(action: usize) -> Self {
        Self(vec![action])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// One reward per objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardVector(pub Vec<f64>);

impl RewardVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step called on a terminated episode")]
    StepAfterTerminal,
    #[error("agent {agent}: action {action} outside [0, {limit})")]
    InvalidAction {
        agent: usize,
        action: usize,
        limit: usize,
    },
    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },
    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),
    #[error("parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },
    /// Failure inside an environment backed by something outside this crate.
    #[error(transparent)]
    External(Box<dyn std::error::Error + Send + Sync>),
}

/// Cell contents of a grid render.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridCell {
    Empty,
    Friendly(usize),
    Enemy,
    Trace,
}

/// Render payload for grid games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRender {
    pub width: usize,
    pub height: usize,
    /// Row-major cells.
    pub cells: Vec<GridCell>,
    pub score: f64,
}

/// The environment contract consumed by learners.
///
/// `get_state` and `is_terminal` take `&mut self` because some
/// implementations answer them over a process boundary.
pub trait Environment: Send {
    fn descriptor(&self) -> &EnvDescriptor;

    /// Duplicates the environment, including its current situation. The copy
    /// draws randomness from a stream derived from the parent seed and the
    /// number of clones made so far.
    fn clone_env(&mut self) -> Result<Box<dyn Environment>, EnvError>;

    fn reset(&mut self) -> Result<(), EnvError>;

    fn step(&mut self, actions: &ActionVector) -> Result<RewardVector, EnvError>;

    fn get_state(&mut self) -> Result<Vec<State>, EnvError>;

    fn is_terminal(&mut self) -> Result<bool, EnvError>;

    fn get_number_of_objectives(&self) -> usize {
        self.descriptor().num_objectives
    }

    fn get_number_of_agents(&self) -> usize {
        self.descriptor().num_agents
    }

    /// Steps taken since the last reset.
    fn elapsed_steps(&self) -> usize;

    fn supports_human_slots(&self) -> bool {
        false
    }

    /// Agent indices whose actions come from a person rather than a policy.
    fn human_agents(&self) -> Vec<usize> {
        Vec::new()
    }

    fn render(&self) -> Option<GridRender> {
        None
    }
}

impl fmt::Debug for dyn Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Environment")
            .field("descriptor", self.descriptor())
            .finish()
    }
}

/// Checks an action vector against a descriptor.
pub fn check_actions(desc: &EnvDescriptor, actions: &ActionVector) -> Result<(), EnvError> {
    if actions.len() != desc.num_agents {
        return Err(EnvError::WrongActionCount {
            expected: desc.num_agents,
            got: actions.len(),
        });
    }
    for (agent, (&action, &limit)) in actions.0.iter().zip(&desc.action_space).enumerate() {
        if action >= limit {
            return Err(EnvError::InvalidAction {
                agent,
                action,
                limit,
            });
        }
    }
    Ok(())
}

/// SplitMix64 finalizer over (parent seed, ordinal).
pub fn derive_seed(parent: u64, ordinal: u64) -> u64 {
    let mut z = parent
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(ordinal.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A scalar value in a flat environment parameter map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Text(v) => write!(f, "{v}"),
        }
    }
}

pub type EnvParams = BTreeMap<String, ParamValue>;

fn param_u64(params: &EnvParams, key: &str, default: u64) -> Result<u64, EnvError> {
    match params.get(key) {
        None => Ok(default),
        Some(ParamValue::Int(v)) if *v >= 0 => Ok(*v as u64),
        Some(ParamValue::Text(s)) => s.parse().map_err(|_| EnvError::InvalidParameter {
            key: key.to_string(),
            reason: format!("`{s}` is not a non-negative integer"),
        }),
        Some(other) => Err(EnvError::InvalidParameter {
            key: key.to_string(),
            reason: format!("`{other}` is not a non-negative integer"),
        }),
    }
}

fn param_usize(params: &EnvParams, key: &str, default: usize) -> Result<usize, EnvError> {
    param_u64(params, key, default as u64).map(|v| v as usize)
}

fn param_bool(params: &EnvParams, key: &str, default: bool) -> Result<bool, EnvError> {
    match params.get(key) {
        None => Ok(default),
        Some(ParamValue::Bool(b)) => Ok(*b),
        Some(other) => Err(EnvError::InvalidParameter {
            key: key.to_string(),
            reason: format!("`{other}` is not a boolean"),
        }),
    }
}

fn reject_unknown(params: &EnvParams, known: &[&str]) -> Result<(), EnvError> {
    match params.keys().find(|k| !known.contains(&k.as_str())) {
        Some(key) => Err(EnvError::InvalidParameter {
            key: key.clone(),
            reason: "not recognized by this environment".into(),
        }),
        None => Ok(()),
    }
}

/// Names accepted by [`make_env`].
pub const REGISTERED_ENVS: [&str; 4] = ["gridworld", "cartpole", "mountaincar_mo", "tankbattle"];

/// Builds a built-in environment from its registry name and parameters.
///
/// Recognized keys: `seed` and `horizon` everywhere; `bins` for
/// `mountaincar_mo`; `agents` and `enemies` for `tankbattle`.
pub fn make_env(name: &str, params: &EnvParams) -> Result<Box<dyn Environment>, EnvError> {
    let seed = param_u64(params, "seed", 0)?;
    match name {
        "gridworld" => {
            reject_unknown(params, &["seed", "horizon"])?;
            let horizon = param_usize(params, "horizon", GridWorld::DEFAULT_HORIZON)?;
            Ok(Box::new(GridWorld::with_horizon(seed, horizon)?))
        }
        "cartpole" => {
            reject_unknown(params, &["seed", "horizon"])?;
            let horizon = param_usize(params, "horizon", CartPole::DEFAULT_HORIZON)?;
            Ok(Box::new(CartPole::with_horizon(seed, horizon)?))
        }
        "mountaincar_mo" => {
            reject_unknown(params, &["seed", "horizon", "bins"])?;
            let horizon = param_usize(params, "horizon", MountainCarMo::DEFAULT_HORIZON)?;
            let bins = param_usize(params, "bins", MountainCarMo::DEFAULT_BINS)?;
            Ok(Box::new(MountainCarMo::with_options(seed, horizon, bins)?))
        }
        "tankbattle" => {
            reject_unknown(params, &["seed", "horizon", "agents", "enemies"])?;
            let horizon = param_usize(params, "horizon", TankBattle::DEFAULT_HORIZON)?;
            let agents = param_usize(params, "agents", 2)?;
            let enemies = param_bool(params, "enemies", true)?;
            Ok(Box::new(TankBattle::with_options(seed, agents, horizon, enemies)?))
        }
        other => Err(EnvError::UnknownEnvironment(other.to_string())),
    }
}

fn check_horizon(horizon: usize) -> Result<(), EnvError> {
    if horizon == 0 {
        Err(EnvError::InvalidParameter {
            key: "horizon".into(),
            reason: "must be at least 1".into(),
        })
    } else {
        Ok(())
    }
}
