//! Advantage actor-critic with parallel learner threads.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, RwLock};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::monitor::{EvaluationReport, Monitor, MonitorEvent, TrainingReport};
use super::returns::{clip, nstep_return, scalarize};
use super::spec::{LearnerSpec, MonitorSpec};
use super::table::argmax;
use super::{run_episodes, LearnError, Learner, Mode};
use crate::env::{derive_seed, ActionVector, Environment, State};
use crate::net::{keys, DataDict, Matrix, PolicyNetwork, SharedNetwork};

/// Shared-policy actor-critic. Every thread owns an environment clone and
/// trains the shared network on its last `train_interval` transitions,
/// with targets from `n_step` returns. Segments run across episode
/// boundaries, so a single thread makes `⌊T / L⌋` updates in `T` steps.
/// All agents of a multi-agent environment use the same policy; human
/// controlled agents are skipped.
pub struct A3c {
    monitor: MonitorSpec,
    spec: LearnerSpec,
    env: Box<dyn Environment>,
    net: SharedNetwork,
    weights: Vec<f64>,
    rng: ChaCha8Rng,
    stop: Arc<AtomicBool>,
}

#[derive(Debug, Clone)]
struct SegmentStep {
    state: Vec<f64>,
    action: usize,
    reward: f64,
    next_state: Vec<f64>,
    terminal: bool,
}

/// Read-only run parameters shared by all workers.
struct RunShared<'a> {
    monitor: &'a MonitorSpec,
    spec: &'a LearnerSpec,
    weights: &'a [f64],
    net: &'a RwLock<PolicyNetwork>,
    global_steps: AtomicU64,
    episodes: AtomicU64,
    halt: AtomicBool,
    stop: &'a AtomicBool,
}

impl RunShared<'_> {
    fn halted(&self) -> bool {
        self.halt.load(Ordering::Relaxed) || self.stop.load(Ordering::Relaxed)
    }
}

impl A3c {
    pub fn new(
        monitor: MonitorSpec,
        spec: LearnerSpec,
        env: Box<dyn Environment>,
        network: PolicyNetwork,
    ) -> Result<Self, LearnError> {
        let weights = spec.weights_for(env.get_number_of_objectives())?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, u64::MAX)),
            monitor,
            spec,
            env,
            net: Arc::new(RwLock::new(network)),
            weights,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn shared_network(&self) -> SharedNetwork {
        self.net.clone()
    }
}

fn sample(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

fn states_matrix<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Result<Matrix, LearnError> {
    let rows: Vec<&[f64]> = rows.collect();
    Ok(Matrix::from_rows(&rows)?)
}

fn read(net: &RwLock<PolicyNetwork>) -> std::sync::RwLockReadGuard<'_, PolicyNetwork> {
    net.read().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Trains on one segment per agent; returns the batch loss.
fn train_segments(run: &RunShared, segments: &[Vec<SegmentStep>]) -> Result<Option<f64>, LearnError> {
    let steps: Vec<&SegmentStep> = segments.iter().flatten().collect();
    if steps.is_empty() {
        return Ok(None);
    }
    let (gamma, n) = (run.spec.gamma, run.spec.n_step);
    let bootstrap = read(run.net).values(&states_matrix(steps.iter().map(|s| s.next_state.as_slice()))?)?;
    let mut returns = Vec::with_capacity(steps.len());
    let mut offset = 0;
    for seg in segments {
        for j in 0..seg.len() {
            let mut rewards = Vec::with_capacity(n);
            let mut tail = None;
            for k in j..seg.len().min(j + n) {
                rewards.push(seg[k].reward);
                if seg[k].terminal {
                    break;
                }
                tail = Some(bootstrap[offset + k]);
            }
            returns.push(nstep_return(&rewards, tail, gamma, n));
        }
        offset += seg.len();
    }
    let actions: Vec<f64> = steps.iter().map(|s| s.action as f64).collect();
    let data = DataDict::new()
        .with(keys::STATES, states_matrix(steps.iter().map(|s| s.state.as_slice()))?)?
        .with(keys::ACTIONS, Matrix::column(&actions))?
        .with(keys::RETURNS, Matrix::column(&returns))?;
    let (loss, grads) = read(run.net).compute_gradients(&data)?;
    run.net
        .write()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
        .apply_gradients(&grads);
    Ok(Some(loss))
}

/// One learner thread. Returns the number of environment steps it took.
fn worker(
    thread: usize,
    mut env: Box<dyn Environment>,
    run: &RunShared,
    events: Sender<MonitorEvent>,
) -> Result<u64, LearnError> {
    let send = |e: MonitorEvent| {
        let _ = events.send(e);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run.spec.seed, thread as u64));
    let budget = run.monitor.step_budget();
    let interval = run.monitor.train_interval;
    let checkpoint_period = run.monitor.steps_per_epoch * run.monitor.checkpoint_every;
    let objectives = env.get_number_of_objectives();
    env.reset()?;
    let agents = env.get_number_of_agents();
    let mut segments: Vec<Vec<SegmentStep>> = vec![Vec::new(); agents];
    let mut returns = vec![0.0; objectives];
    let mut length = 0u64;
    let mut local = 0u64;
    while !run.halted() {
        let global = run.global_steps.fetch_add(1, Ordering::Relaxed);
        if global >= budget {
            break;
        }
        let humans = env.human_agents();
        let states = env.get_state()?;
        let ai: Vec<usize> = (0..agents).filter(|i| !humans.contains(i)).collect();
        let mut actions = vec![0; agents];
        if !ai.is_empty() {
            let probs = read(run.net).forward(0, &states_matrix(ai.iter().map(|&i| states[i].values.as_slice()))?)?;
            for (row, &i) in ai.iter().enumerate() {
                actions[i] = sample(probs.row(row), &mut rng);
            }
        }
        let raw = env.step(&ActionVector(actions.clone()))?;
        let reward = clip(scalarize(raw.as_slice(), run.weights)?, run.spec.reward_clip);
        let terminal = env.is_terminal()?;
        let next = env.get_state()?;
        for &i in &ai {
            segments[i].push(SegmentStep {
                state: states[i].values.clone(),
                action: actions[i],
                reward,
                next_state: next[i].values.clone(),
                terminal,
            });
        }
        for (acc, r) in returns.iter_mut().zip(raw.as_slice()) {
            *acc += r;
        }
        local += 1;
        length += 1;
        let mut limit_reached = false;
        if terminal {
            let done = run.episodes.fetch_add(1, Ordering::Relaxed) + 1;
            send(MonitorEvent::Episode {
                thread,
                returns: std::mem::replace(&mut returns, vec![0.0; objectives]),
                length,
                global_steps: global + 1,
            });
            length = 0;
            limit_reached = run.monitor.max_episodes.is_some_and(|m| done >= m);
            env.reset()?;
        }
        if local.is_multiple_of(interval) {
            if let Some(loss) = train_segments(run, &segments)? {
                send(MonitorEvent::Loss(loss));
                send(MonitorEvent::TrainCall);
            }
            segments.iter_mut().for_each(Vec::clear);
        }
        if let Some(dir) = &run.monitor.checkpoint_dir {
            if checkpoint_period > 0 && (global + 1).is_multiple_of(checkpoint_period) {
                std::fs::create_dir_all(dir)?;
                let epoch = (global + 1) / run.monitor.steps_per_epoch;
                let path: PathBuf = dir.join(format!("checkpoint-{epoch}.rlfk"));
                read(run.net).save_model(&path)?;
                send(MonitorEvent::Checkpoint(path));
            }
        }
        if limit_reached {
            run.halt.store(true, Ordering::Relaxed);
        }
    }
    Ok(local)
}

impl Learner for A3c {
    fn algorithm(&self) -> &str {
        &self.spec.algorithm
    }

    fn train(&mut self) -> Result<TrainingReport, LearnError> {
        let threads = self.spec.threads;
        let mut monitor = Monitor::new(&self.monitor, &self.spec.algorithm, threads)?;
        let mut envs = Vec::with_capacity(threads);
        for _ in 0..threads {
            envs.push(self.env.clone_env()?);
        }
        let run = RunShared {
            monitor: &self.monitor,
            spec: &self.spec,
            weights: &self.weights,
            net: &self.net,
            global_steps: AtomicU64::new(0),
            episodes: AtomicU64::new(0),
            halt: AtomicBool::new(false),
            stop: &self.stop,
        };
        let (tx, rx) = mpsc::channel();
        let mut failure: Option<String> = None;
        let mut total = 0;
        thread::scope(|scope| {
            let handles: Vec<_> = envs
                .into_iter()
                .enumerate()
                .map(|(i, env)| {
                    let tx = tx.clone();
                    let run = &run;
                    scope.spawn(move || {
                        let result = worker(i, env, run, tx);
                        if result.is_err() {
                            run.halt.store(true, Ordering::Relaxed);
                        }
                        result
                    })
                })
                .collect();
            drop(tx);
            for event in rx {
                if let Err(e) = monitor.record(event) {
                    run.halt.store(true, Ordering::Relaxed);
                    failure.get_or_insert(e.to_string());
                }
            }
            for h in handles {
                match h.join() {
                    Ok(Ok(steps)) => total += steps,
                    Ok(Err(e)) => {
                        failure.get_or_insert(e.to_string());
                    }
                    Err(_) => {
                        failure.get_or_insert("learner thread panicked".into());
                    }
                }
            }
        });
        let report = monitor.finish(total)?;
        match failure {
            None => Ok(report),
            Some(reason) => Err(LearnError::TrainingAborted {
                reason,
                report: Box::new(report),
            }),
        }
    }

    fn evaluate(&mut self, checkpoint: Option<&Path>) -> Result<EvaluationReport, LearnError> {
        if let Some(path) = checkpoint {
            self.net
                .write()
                .unwrap_or_else(|poisoned| poisoned.into_inner())
                .load_model(path)?;
        }
        let net = read(&self.net);
        let stop = self.stop.clone();
        run_episodes(self.env.as_mut(), self.monitor.eval_episodes, &stop, |s| {
            let probs = net.forward(0, &Matrix::from_rows(&[s.values.as_slice()])?)?;
            Ok(argmax(probs.row(0)))
        })
    }

    fn select_action(&mut self, state: &State, mode: Mode) -> Result<usize, LearnError> {
        let probs = read(&self.net).forward(0, &Matrix::from_rows(&[state.values.as_slice()])?)?;
        Ok(match mode {
            Mode::Eval => argmax(probs.row(0)),
            Mode::Train => sample(probs.row(0), &mut self.rng),
        })
    }

    fn save_checkpoint(&self, path: &Path) -> Result<(), LearnError> {
        Ok(read(&self.net).save_model(path)?)
    }

    fn stop_handle(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    fn network(&self) -> Option<SharedNetwork> {
        Some(self.net.clone())
    }
}
