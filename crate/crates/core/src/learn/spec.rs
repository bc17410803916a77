//! Learner and monitor parameter dictionaries.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSpec {
    pub start: f64,
    pub end: f64,
    /// Global environment steps over which ε falls linearly from `start`
    /// to `end`.
    pub decay_steps: u64,
}

impl Default for EpsilonSpec {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_steps: 10_000,
        }
    }
}

impl EpsilonSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            start: value,
            end: value,
            decay_steps: 0,
        }
    }

    pub fn at(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSpec {
    pub algorithm: String,
    pub gamma: f64,
    /// Step size of tabular updates. Neural learners take theirs from the
    /// network configuration.
    pub learning_rate: f64,
    pub epsilon: EpsilonSpec,
    pub n_step: usize,
    pub threads: usize,
    /// Scalarization weights, one per objective. Defaults to `[1.0]` for
    /// single-objective environments.
    pub objective_weights: Option<Vec<f64>>,
    pub reward_clip: Option<f64>,
    /// Enables experience replay for tabular Q-learning.
    pub replay_capacity: Option<usize>,
    pub seed: u64,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        Self {
            algorithm: "q_learning".into(),
            gamma: 0.99,
            learning_rate: 0.1,
            epsilon: EpsilonSpec::default(),
            n_step: 5,
            threads: 1,
            objective_weights: None,
            reward_clip: None,
            replay_capacity: None,
            seed: 0,
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> LearnError {
    LearnError::SpecValidation {
        field: field.to_string(),
        message: message.into(),
    }
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("learner.gamma", "must lie in (0, 1]"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learner.learning_rate", "must be positive"));
        }
        for (field, v) in [("learner.epsilon.start", self.epsilon.start), ("learner.epsilon.end", self.epsilon.end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(field, "must lie in [0, 1]"));
            }
        }
        if self.n_step == 0 {
            return Err(invalid("learner.n_step", "must be at least 1"));
        }
        if self.threads == 0 {
            return Err(invalid("learner.threads", "must be at least 1"));
        }
        if let Some(w) = &self.objective_weights {
            if w.is_empty() || w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(invalid("learner.objective_weights", "entries must be finite and non-negative"));
            }
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(invalid("learner.objective_weights", "must have a positive sum"));
            }
        }
        if let Some(c) = self.reward_clip {
            if !(c > 0.0) {
                return Err(invalid("learner.reward_clip", "must be positive"));
            }
        }
        if self.replay_capacity == Some(0) {
            return Err(invalid("learner.replay_capacity", "must be positive"));
        }
        Ok(())
    }

    /// Weights resolved against an environment's objective count.
    pub fn weights_for(&self, objectives: usize) -> Result<Vec<f64>, LearnError> {
        match &self.objective_weights {
            Some(w) if w.len() == objectives => Ok(w.clone()),
            Some(w) => Err(LearnError::WeightDimMismatch {
                objectives,
                weights: w.len(),
            }),
            None if objectives == 1 => Ok(vec![1.0]),
            None => Err(invalid(
                "learner.objective_weights",
                format!("required for an environment with {objectives} objectives"),
            )),
        }
    }
}

/// Training budget and reporting. One epoch is `steps_per_epoch` global
/// environment steps, summed over all learner threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSpec {
    pub epochs: u64,
    pub steps_per_epoch: u64,
    /// Thread-local steps between training calls.
    pub train_interval: u64,
    /// Episodes between progress log lines.
    pub report_frequency: u64,
    pub eval_episodes: usize,
    /// Stop after this many completed episodes, if set.
    pub max_episodes: Option<u64>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Epochs between checkpoints.
    pub checkpoint_every: u64,
    /// Transitions per replay training call.
    pub batch_size: usize,
    /// Where the per-episode log and summary file are written, if set.
    pub output_dir: Option<PathBuf>,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        Self {
            epochs: 1,
            steps_per_epoch: 10_000,
            train_interval: 5,
            report_frequency: 100,
            eval_episodes: 10,
            max_episodes: None,
            checkpoint_dir: None,
            checkpoint_every: 1,
            batch_size: 32,
            output_dir: None,
        }
    }
}

impl MonitorSpec {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.epochs == 0 {
            return Err(invalid("monitor.epochs", "must be at least 1"));
        }
        if self.train_interval == 0 {
            return Err(invalid("monitor.train_interval", "must be at least 1"));
        }
        if self.checkpoint_every == 0 {
            return Err(invalid("monitor.checkpoint_every", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("monitor.batch_size", "must be at least 1"));
        }
        Ok(())
    }

    pub fn step_budget(&self) -> u64 {
        self.epochs.saturating_mul(self.steps_per_epoch)
    }
}
