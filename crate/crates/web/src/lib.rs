//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Two exported types back the page: [`GridDemo`] trains a tabular learner
//! on the 4×4 GridWorld in increments and exposes its values and greedy
//! policy, and [`MountainCarDemo`] trains multi-objective Q-learning under
//! user-chosen objective weights and replays the greedy trajectory.

use rlframe_core::env::{ActionVector, Environment, GridWorld, MountainCarMo};
use rlframe_core::learn::{create_learner, EpsilonSpec, Learner, LearnerSpec, Mode, MonitorSpec};
use wasm_bindgen::prelude::*;

const GRID_CELLS: usize = GridWorld::NUM_CELLS;
const GRID_ACTIONS: usize = 4;

fn js_error(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Incrementally trained tabular learner on GridWorld.
#[wasm_bindgen]
pub struct GridDemo {
    algorithm: String,
    seed: u64,
    episodes: u64,
    learner: Box<dyn Learner>,
}

impl GridDemo {
    pub fn create(algorithm: &str, seed: u64) -> Result<GridDemo, String> {
        let mut demo = GridDemo {
            algorithm: algorithm.to_string(),
            seed,
            episodes: 0,
            learner: Self::learner(algorithm, seed, 0)?,
        };
        demo.learner.train().map_err(|e| e.to_string())?;
        Ok(demo)
    }

    fn learner(algorithm: &str, seed: u64, episodes: u64) -> Result<Box<dyn Learner>, String> {
        let monitor = MonitorSpec {
            steps_per_epoch: u64::MAX / 2,
            max_episodes: Some(episodes),
            eval_episodes: 1,
            report_frequency: 0,
            ..Default::default()
        };
        let spec = LearnerSpec {
            algorithm: algorithm.to_string(),
            gamma: 0.9,
            learning_rate: 0.1,
            epsilon: EpsilonSpec {
                start: 1.0,
                end: 0.05,
                decay_steps: 20_000,
            },
            seed,
            ..Default::default()
        };
        create_learner(monitor, spec, Box::new(GridWorld::new(seed)), None).map_err(|e| e.to_string())
    }

    /// Retrains from scratch to `episodes` in total, so the result does not
    /// depend on how training was split into calls.
    pub fn train_to(&mut self, episodes: u64) -> Result<u64, String> {
        let mut learner = Self::learner(&self.algorithm, self.seed, episodes)?;
        learner.train().map_err(|e| e.to_string())?;
        self.learner = learner;
        self.episodes = episodes;
        Ok(self.episodes)
    }

    pub fn greedy_path_cells(&mut self) -> Result<Vec<u32>, String> {
        let mut env = GridWorld::new(self.seed);
        let mut cells = Vec::new();
        env.reset().map_err(|e| e.to_string())?;
        cells.push(GridWorld::cell_index(env.cell()) as u32);
        while !env.is_terminal().map_err(|e| e.to_string())? && cells.len() <= GridWorld::DEFAULT_HORIZON {
            let state = env.get_state().map_err(|e| e.to_string())?.remove(0);
            let action = self.learner.select_action(&state, Mode::Eval).map_err(|e| e.to_string())?;
            env.step(&ActionVector::single(action)).map_err(|e| e.to_string())?;
            cells.push(GridWorld::cell_index(env.cell()) as u32);
        }
        Ok(cells)
    }
}

#[wasm_bindgen]
impl GridDemo {
    /// `algorithm` is `q_learning` or `monte_carlo`.
    #[wasm_bindgen(constructor)]
    pub fn new(algorithm: &str, seed: u32) -> Result<GridDemo, JsError> {
        Self::create(algorithm, seed as u64).map_err(js_error)
    }

    /// Episodes trained so far.
    pub fn episodes(&self) -> u32 {
        self.episodes as u32
    }

    /// Trains `more` additional episodes; returns the new total.
    pub fn train(&mut self, more: u32) -> Result<u32, JsError> {
        let total = self.episodes + more as u64;
        self.train_to(total).map(|n| n as u32).map_err(js_error)
    }

    /// Greedy state value per cell, row-major.
    pub fn values(&self) -> Vec<f64> {
        let table = self.learner.table().expect("tabular learner");
        (0..GRID_CELLS)
            .map(|s| (0..GRID_ACTIONS).map(|a| table.get(s, a)[0]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Greedy action per cell: 0 up, 1 down, 2 left, 3 right.
    pub fn policy(&self) -> Vec<u8> {
        let table = self.learner.table().expect("tabular learner");
        (0..GRID_CELLS)
            .map(|s| rlframe_core::learn::argmax(&table.scalar_row(s, &[1.0])) as u8)
            .collect()
    }

    /// Cells visited by the greedy policy from the start, goal included.
    pub fn greedy_path(&mut self) -> Result<Vec<u32>, JsError> {
        self.greedy_path_cells().map_err(js_error)
    }
}

/// Multi-objective Q-learning on the discretized Mountain Car.
#[wasm_bindgen]
pub struct MountainCarDemo {
    weights: Vec<f64>,
    seed: u64,
    learner: Box<dyn Learner>,
    steps: u64,
}

impl MountainCarDemo {
    pub fn create(weights: Vec<f64>, steps: u64, seed: u64) -> Result<MountainCarDemo, String> {
        let monitor = MonitorSpec {
            steps_per_epoch: steps,
            eval_episodes: 1,
            report_frequency: 0,
            ..Default::default()
        };
        let spec = LearnerSpec {
            algorithm: "mo_q_learning".into(),
            gamma: 0.99,
            learning_rate: 0.1,
            epsilon: EpsilonSpec {
                start: 1.0,
                end: 0.05,
                decay_steps: steps / 2,
            },
            objective_weights: Some(weights.clone()),
            seed,
            ..Default::default()
        };
        let mut learner =
            create_learner(monitor, spec, Box::new(MountainCarMo::new(seed)), None).map_err(|e| e.to_string())?;
        learner.train().map_err(|e| e.to_string())?;
        Ok(Self {
            weights,
            seed,
            learner,
            steps,
        })
    }

    /// Greedy rollout: positions visited and the summed reward per objective.
    pub fn rollout(&mut self, limit: usize) -> Result<(Vec<f64>, Vec<f64>), String> {
        let mut env = MountainCarMo::new(self.seed);
        let mut positions = Vec::new();
        let mut returns = vec![0.0; 3];
        env.reset().map_err(|e| e.to_string())?;
        positions.push(env.position());
        while positions.len() <= limit && !env.is_terminal().map_err(|e| e.to_string())? {
            let state = env.get_state().map_err(|e| e.to_string())?.remove(0);
            let action = self.learner.select_action(&state, Mode::Eval).map_err(|e| e.to_string())?;
            let r = env.step(&ActionVector::single(action)).map_err(|e| e.to_string())?;
            for (acc, x) in returns.iter_mut().zip(r.as_slice()) {
                *acc += x;
            }
            positions.push(env.position());
        }
        Ok((positions, returns))
    }
}

#[wasm_bindgen]
impl MountainCarDemo {
    /// Trains for `steps` environment steps with weights for the time,
    /// reversal and acceleration objectives.
    #[wasm_bindgen(constructor)]
    pub fn new(time: f64, reversals: f64, acceleration: f64, steps: u32, seed: u32) -> Result<MountainCarDemo, JsError> {
        Self::create(vec![time, reversals, acceleration], steps as u64, seed as u64).map_err(js_error)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }

    pub fn steps(&self) -> u32 {
        self.steps as u32
    }

    /// Car positions along the greedy trajectory, capped at `limit` steps.
    pub fn trajectory(&mut self, limit: u32) -> Result<Vec<f64>, JsError> {
        self.rollout(limit as usize).map(|(p, _)| p).map_err(js_error)
    }

    /// Summed reward per objective along the greedy trajectory.
    pub fn returns(&mut self, limit: u32) -> Result<Vec<f64>, JsError> {
        self.rollout(limit as usize).map(|(_, r)| r).map_err(js_error)
    }
}
