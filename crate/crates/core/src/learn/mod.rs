//! Learners, experience replay, the training monitor, and the learner
//! factory.
//!
//! Tabular learners share one engine ([`TabularLearner`]) and differ only in
//! their update hooks. [`A3c`] runs several threads, each on its own
//! environment clone, against one shared network.

mod a3c;
mod monitor;
mod replay;
mod returns;
mod spec;
mod table;
mod tabular;

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::env::{derive_seed, ActionVector, EnvError, Environment, State};
use crate::net::{Loss, NetError, PolicyNetwork, SharedNetwork};

pub use a3c::A3c;
pub use monitor::{
    EpisodeRecord, EvalEpisode, EvaluationReport, Monitor, MonitorEvent, Timing, TrainingReport,
    LOG_FILE, SUMMARY_FILE,
};
pub use replay::ReplayBuffer;
pub use returns::{clip, discounted_return, nstep_return, scalarize};
pub use spec::{EpsilonSpec, LearnerSpec, MonitorSpec};
pub use table::{argmax, mc_update, q_update, QEntry, QTable, TabularStep};
pub use tabular::{
    MonteCarlo, QLearning, TabularCheckpoint, TabularContext, TabularHooks, TabularLearner,
    ValueMode,
};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("unknown algorithm `{name}`; registered: {}", registered.join(", "))]
    UnknownAlgorithm { name: String, registered: Vec<String> },
    #[error("invalid spec at `{field}`: {message}")]
    SpecValidation { field: String, message: String },
    #[error("network incompatible with environment: {0}")]
    IncompatibleNetwork(String),
    #[error("environment unsupported by this learner: {0}")]
    IncompatibleEnvironment(String),
    #[error("{weights} weights for {objectives} objectives")]
    WeightDimMismatch { objectives: usize, weights: usize },
    #[error("requested {requested} samples from a buffer of {available}")]
    NotEnoughSamples { requested: usize, available: usize },
    #[error("episode has not terminated")]
    EpisodeNotTerminal,
    #[error("training aborted: {reason}")]
    TrainingAborted {
        reason: String,
        report: Box<TrainingReport>,
    },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Exploratory: ε-greedy for tabular learners, sampling for policies.
    Train,
    /// Greedy, ties to the lowest action index.
    Eval,
}

/// A learner as driven by the monitor and the command line.
pub trait Learner: Send {
    fn algorithm(&self) -> &str;

    fn train(&mut self) -> Result<TrainingReport, LearnError>;

    /// Greedy episodes without any parameter update, optionally after
    /// restoring `checkpoint`.
    fn evaluate(&mut self, checkpoint: Option<&Path>) -> Result<EvaluationReport, LearnError>;

    fn select_action(&mut self, state: &State, mode: Mode) -> Result<usize, LearnError>;

    fn save_checkpoint(&self, path: &Path) -> Result<(), LearnError>;

    /// Setting the flag asks a running `train` or `evaluate` to stop at the
    /// next step.
    fn stop_handle(&self) -> Arc<AtomicBool>;

    fn network(&self) -> Option<SharedNetwork> {
        None
    }

    fn table(&self) -> Option<&QTable> {
        None
    }
}

/// Names accepted by [`create_learner`].
pub const ALGORITHMS: [&str; 4] = ["q_learning", "monte_carlo", "mo_q_learning", "a3c"];

pub fn is_neural(algorithm: &str) -> bool {
    algorithm == "a3c"
}

/// Builds a learner from the monitor and learner dictionaries. Neural
/// learners need `network`; tabular learners ignore it.
pub fn create_learner(
    monitor: MonitorSpec,
    learner: LearnerSpec,
    env: Box<dyn Environment>,
    network: Option<PolicyNetwork>,
) -> Result<Box<dyn Learner>, LearnError> {
    monitor.validate()?;
    learner.validate()?;
    let q_learning = || match learner.replay_capacity {
        Some(capacity) => QLearning::with_replay(capacity, derive_seed(learner.seed, 1)),
        None => QLearning::default(),
    };
    match learner.algorithm.as_str() {
        "q_learning" => Ok(Box::new(TabularLearner::new(
            q_learning(),
            ValueMode::Scalarized,
            monitor,
            learner,
            env,
        )?)),
        "mo_q_learning" => Ok(Box::new(TabularLearner::new(
            q_learning(),
            ValueMode::Vector,
            monitor,
            learner,
            env,
        )?)),
        "monte_carlo" => Ok(Box::new(TabularLearner::new(
            MonteCarlo,
            ValueMode::Scalarized,
            monitor,
            learner,
            env,
        )?)),
        "a3c" => {
            let network = network.ok_or_else(|| {
                LearnError::IncompatibleNetwork("a3c needs an actor-critic network".into())
            })?;
            check_policy_network(&network, env.descriptor())?;
            Ok(Box::new(A3c::new(monitor, learner, env, network)?))
        }
        other => Err(LearnError::UnknownAlgorithm {
            name: other.to_string(),
            registered: ALGORITHMS.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

/// An actor-critic pair whose input and action widths fit the environment.
pub fn check_policy_network(
    net: &PolicyNetwork,
    desc: &crate::env::EnvDescriptor,
) -> Result<(), LearnError> {
    let actor = &net.configs()[0];
    if !net.is_actor_critic() || !matches!(actor.loss, Loss::A3cComposite { .. }) {
        return Err(LearnError::IncompatibleNetwork(
            "expected an actor with a3c_composite loss followed by a critic".into(),
        ));
    }
    if net.input_dim() != desc.state_dim {
        return Err(LearnError::IncompatibleNetwork(format!(
            "network takes {} inputs, environment states have {}",
            net.input_dim(),
            desc.state_dim
        )));
    }
    if let Some(&n) = desc.action_space.iter().find(|&&n| n != net.output_dim()) {
        return Err(LearnError::IncompatibleNetwork(format!(
            "actor has {} outputs, environment has {n} actions",
            net.output_dim()
        )));
    }
    Ok(())
}

/// Runs `episodes` episodes choosing each AI agent's action with `choose`.
/// Human-controlled agents get a placeholder the environment replaces.
pub(crate) fn run_episodes(
    env: &mut dyn Environment,
    episodes: usize,
    stop: &AtomicBool,
    mut choose: impl FnMut(&State) -> Result<usize, LearnError>,
) -> Result<EvaluationReport, LearnError> {
    let m = env.get_number_of_objectives();
    let mut out = Vec::with_capacity(episodes);
    'episodes: for _ in 0..episodes {
        env.reset()?;
        let humans = env.human_agents();
        let mut returns = vec![0.0; m];
        let mut length = 0;
        while !env.is_terminal()? {
            if stop.load(Ordering::Relaxed) {
                break 'episodes;
            }
            let states = env.get_state()?;
            let mut actions = Vec::with_capacity(states.len());
            for (i, s) in states.iter().enumerate() {
                actions.push(if humans.contains(&i) { 0 } else { choose(s)? });
            }
            let r = env.step(&ActionVector(actions))?;
            for (acc, x) in returns.iter_mut().zip(r.as_slice()) {
                *acc += x;
            }
            length += 1;
        }
        out.push(EvalEpisode { returns, length });
    }
    Ok(EvaluationReport::from_episodes(out, m))
}
