//! The tabular learner engine and its update hooks.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::monitor::{EvaluationReport, Monitor, MonitorEvent, TrainingReport};
use super::replay::ReplayBuffer;
use super::returns::{clip, scalarize};
use super::spec::{LearnerSpec, MonitorSpec};
use super::table::{argmax, mc_update, q_update, QEntry, QTable, TabularStep};
use super::{run_episodes, LearnError, Learner, Mode};
use crate::env::{ActionVector, Environment, State};

/// How rewards reach the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueMode {
    /// Rewards are scalarized (then clipped) and the table holds one value
    /// per pair.
    Scalarized,
    /// Each objective is clipped and kept; actions are chosen by the
    /// scalarized value vector.
    Vector,
}

/// What update hooks may read and modify.
pub struct TabularContext {
    pub table: QTable,
    pub gamma: f64,
    pub learning_rate: f64,
    /// Weights over the table's value vector (`[1.0]` when scalarized).
    pub weights: Vec<f64>,
    pub batch_size: usize,
}

/// Override points of the tabular engine. Each returns an optional loss
/// sample; the engine reports the per-episode mean.
pub trait TabularHooks: Send {
    fn on_step(&mut self, _ctx: &mut TabularContext, _step: &TabularStep) -> Result<Option<f64>, LearnError> {
        Ok(None)
    }

    fn on_episode_end(&mut self, _ctx: &mut TabularContext, _episode: &[TabularStep]) -> Result<Option<f64>, LearnError> {
        Ok(None)
    }

    fn on_train_interval(&mut self, _ctx: &mut TabularContext) -> Result<Option<f64>, LearnError> {
        Ok(None)
    }
}

/// One-step temporal-difference updates, online or from a replay buffer.
#[derive(Debug, Default)]
pub struct QLearning {
    replay: Option<ReplayBuffer<TabularStep>>,
}

impl QLearning {
    pub fn with_replay(capacity: usize, seed: u64) -> Self {
        Self {
            replay: Some(ReplayBuffer::new(capacity, seed)),
        }
    }
}

fn td_step(ctx: &mut TabularContext, s: &TabularStep) -> f64 {
    q_update(
        &mut ctx.table,
        s.state,
        s.action,
        &s.reward,
        s.next_state,
        s.terminal,
        ctx.learning_rate,
        ctx.gamma,
        &ctx.weights,
    )
}

impl TabularHooks for QLearning {
    fn on_step(&mut self, ctx: &mut TabularContext, step: &TabularStep) -> Result<Option<f64>, LearnError> {
        match &mut self.replay {
            Some(buffer) => {
                buffer.store(step.clone());
                Ok(None)
            }
            None => Ok(Some(td_step(ctx, step).powi(2))),
        }
    }

    fn on_train_interval(&mut self, ctx: &mut TabularContext) -> Result<Option<f64>, LearnError> {
        let Some(buffer) = &mut self.replay else {
            return Ok(None);
        };
        if buffer.len() < ctx.batch_size {
            return Ok(None);
        }
        let batch = buffer.sample(ctx.batch_size)?;
        let sq: f64 = batch.iter().map(|s| td_step(ctx, s).powi(2)).sum();
        Ok(Some(sq / batch.len() as f64))
    }
}

/// First-visit Monte-Carlo: Q-learning's engine with the update moved to
/// the end of each episode.
#[derive(Debug, Default)]
pub struct MonteCarlo;

impl TabularHooks for MonteCarlo {
    fn on_episode_end(&mut self, ctx: &mut TabularContext, episode: &[TabularStep]) -> Result<Option<f64>, LearnError> {
        mc_update(&mut ctx.table, episode, ctx.gamma).map(Some)
    }
}

/// JSON checkpoint of a tabular learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularCheckpoint {
    pub algorithm: String,
    pub states: usize,
    pub actions: usize,
    pub objectives: usize,
    pub entries: Vec<QEntry>,
}

pub struct TabularLearner<H> {
    hooks: H,
    mode: ValueMode,
    monitor: MonitorSpec,
    spec: LearnerSpec,
    env: Box<dyn Environment>,
    ctx: TabularContext,
    /// Scalarization weights over raw env rewards.
    env_weights: Vec<f64>,
    rng: ChaCha8Rng,
    steps: u64,
    stop: Arc<AtomicBool>,
}

impl<H: TabularHooks> TabularLearner<H> {
    pub fn new(
        hooks: H,
        mode: ValueMode,
        monitor: MonitorSpec,
        spec: LearnerSpec,
        env: Box<dyn Environment>,
    ) -> Result<Self, LearnError> {
        let desc = env.descriptor().clone();
        let Some(states) = desc.discrete_states else {
            return Err(LearnError::IncompatibleEnvironment(
                "tabular learners need a discrete state index".into(),
            ));
        };
        if desc.num_agents != 1 {
            return Err(LearnError::IncompatibleEnvironment(
                "tabular learners drive a single agent".into(),
            ));
        }
        let env_weights = spec.weights_for(desc.num_objectives)?;
        let (objectives, weights) = match mode {
            ValueMode::Scalarized => (1, vec![1.0]),
            ValueMode::Vector => (desc.num_objectives, env_weights.clone()),
        };
        Ok(Self {
            ctx: TabularContext {
                table: QTable::new(states, desc.action_space[0], objectives),
                gamma: spec.gamma,
                learning_rate: spec.learning_rate,
                weights,
                batch_size: monitor.batch_size,
            },
            hooks,
            mode,
            monitor,
            env_weights,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec,
            env,
            steps: 0,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn table(&self) -> &QTable {
        &self.ctx.table
    }

    pub fn table_mut(&mut self) -> &mut QTable {
        &mut self.ctx.table
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn index(state: &State) -> Result<usize, LearnError> {
        state.discrete.ok_or_else(|| {
            LearnError::IncompatibleEnvironment("state carries no discrete index".into())
        })
    }

    fn greedy(&self, s: usize) -> usize {
        argmax(&self.ctx.table.scalar_row(s, &self.ctx.weights))
    }

    fn choose(&mut self, s: usize, mode: Mode) -> usize {
        match mode {
            Mode::Eval => self.greedy(s),
            Mode::Train => {
                let eps = self.spec.epsilon.at(self.steps);
                let roll: f64 = self.rng.gen();
                if roll < eps {
                    self.rng.gen_range(0..self.ctx.table.actions())
                } else {
                    self.greedy(s)
                }
            }
        }
    }

    fn process_reward(&self, raw: &[f64]) -> Result<Vec<f64>, LearnError> {
        Ok(match self.mode {
            ValueMode::Scalarized => vec![clip(scalarize(raw, &self.env_weights)?, self.spec.reward_clip)],
            ValueMode::Vector => raw.iter().map(|&r| clip(r, self.spec.reward_clip)).collect(),
        })
    }

    fn run(&mut self, monitor: &mut Monitor) -> Result<(), LearnError> {
        let budget = self.monitor.step_budget();
        let objectives = self.env.get_number_of_objectives();
        let mut losses = Vec::new();
        let mut episode = Vec::new();
        let mut returns = vec![0.0; objectives];
        self.env.reset()?;
        while self.steps < budget && !monitor.episode_limit_reached() && !self.stop.load(Ordering::Relaxed) {
            let s = Self::index(&self.env.get_state()?[0])?;
            let a = self.choose(s, Mode::Train);
            let raw = self.env.step(&ActionVector::single(a))?;
            self.steps += 1;
            let next = Self::index(&self.env.get_state()?[0])?;
            let terminal = self.env.is_terminal()?;
            for (acc, r) in returns.iter_mut().zip(raw.as_slice()) {
                *acc += r;
            }
            let step = TabularStep {
                state: s,
                action: a,
                reward: self.process_reward(raw.as_slice())?,
                next_state: next,
                terminal,
            };
            losses.extend(self.hooks.on_step(&mut self.ctx, &step)?);
            episode.push(step);
            if self.steps.is_multiple_of(self.monitor.train_interval) {
                if let Some(l) = self.hooks.on_train_interval(&mut self.ctx)? {
                    losses.push(l);
                    monitor.record(MonitorEvent::TrainCall)?;
                }
            }
            if terminal {
                losses.extend(self.hooks.on_episode_end(&mut self.ctx, &episode)?);
                if !losses.is_empty() {
                    monitor.record(MonitorEvent::Loss(losses.iter().sum::<f64>() / losses.len() as f64))?;
                }
                monitor.record(MonitorEvent::Episode {
                    thread: 0,
                    returns: std::mem::replace(&mut returns, vec![0.0; objectives]),
                    length: episode.len() as u64,
                    global_steps: self.steps,
                })?;
                losses.clear();
                episode.clear();
                self.env.reset()?;
            }
            if let Some(dir) = &self.monitor.checkpoint_dir {
                let per = self.monitor.steps_per_epoch * self.monitor.checkpoint_every;
                if per > 0 && self.steps.is_multiple_of(per) {
                    fs::create_dir_all(dir)?;
                    let path = dir.join(format!("checkpoint-{}.json", self.steps / self.monitor.steps_per_epoch));
                    self.save_checkpoint(&path)?;
                    monitor.record(MonitorEvent::Checkpoint(path))?;
                }
            }
        }
        Ok(())
    }

    fn checkpoint(&self) -> TabularCheckpoint {
        let t = &self.ctx.table;
        TabularCheckpoint {
            algorithm: self.spec.algorithm.clone(),
            states: t.states(),
            actions: t.actions(),
            objectives: t.objectives(),
            entries: t.entries(),
        }
    }

    fn load(&mut self, path: &Path) -> Result<(), LearnError> {
        let text = fs::read_to_string(path)?;
        let c: TabularCheckpoint =
            serde_json::from_str(&text).map_err(|e| LearnError::Checkpoint(e.to_string()))?;
        let t = &self.ctx.table;
        if (c.states, c.actions, c.objectives) != (t.states(), t.actions(), t.objectives()) {
            return Err(LearnError::Checkpoint(format!(
                "table is {}x{}x{}, checkpoint is {}x{}x{}",
                t.states(),
                t.actions(),
                t.objectives(),
                c.states,
                c.actions,
                c.objectives
            )));
        }
        self.ctx.table = QTable::from_entries(c.states, c.actions, c.objectives, &c.entries)?;
        Ok(())
    }
}

impl<H: TabularHooks> Learner for TabularLearner<H> {
    fn algorithm(&self) -> &str {
        &self.spec.algorithm
    }

    fn train(&mut self) -> Result<TrainingReport, LearnError> {
        let mut monitor = Monitor::new(&self.monitor, &self.spec.algorithm, 1)?;
        let start = self.steps;
        match self.run(&mut monitor) {
            Ok(()) => monitor.finish(self.steps - start),
            Err(e) => Err(LearnError::TrainingAborted {
                reason: e.to_string(),
                report: Box::new(monitor.finish(self.steps - start)?),
            }),
        }
    }

    fn evaluate(&mut self, checkpoint: Option<&Path>) -> Result<EvaluationReport, LearnError> {
        if let Some(path) = checkpoint {
            self.load(path)?;
        }
        let episodes = self.monitor.eval_episodes;
        let stop = self.stop.clone();
        let table = &self.ctx.table;
        let weights = &self.ctx.weights;
        run_episodes(self.env.as_mut(), episodes, &stop, |s| {
            Ok(argmax(&table.scalar_row(Self::index(s)?, weights)))
        })
    }

    fn select_action(&mut self, state: &State, mode: Mode) -> Result<usize, LearnError> {
        let s = Self::index(state)?;
        Ok(self.choose(s, mode))
    }

    fn save_checkpoint(&self, path: &Path) -> Result<(), LearnError> {
        let json = serde_json::to_string(&self.checkpoint()).expect("checkpoint serializes");
        fs::write(path, json)?;
        Ok(())
    }

    fn stop_handle(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    fn table(&self) -> Option<&QTable> {
        Some(&self.ctx.table)
    }
}
