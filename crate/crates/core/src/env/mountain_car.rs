use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    check_actions, check_horizon, derive_seed, ActionVector, EnvDescriptor, EnvError,
    Environment, RewardVector, State,
};

const MIN_POSITION: f64 = -1.2;
const MAX_POSITION: f64 = 0.6;
const MAX_SPEED: f64 = 0.07;
const GOAL_POSITION: f64 = 0.5;
const POWER: f64 = 0.001;
const GRAVITY: f64 = 0.0025;

/// Mountain car with three objectives: time, action reversals, and
/// acceleration effort.
///
/// Actions 0, 1, 2 apply thrust -1, 0, +1. The rewards of one step are
/// `[-1, -1 if the thrust sign flipped versus the previous step else 0,
/// -1 if thrust is non-zero else 0]`. The discrete index bins position and
/// velocity uniformly into `bins × bins` cells.
#[derive(Debug, Clone)]
pub struct MountainCarMo {
    desc: EnvDescriptor,
    seed: u64,
    clones: u64,
    rng: ChaCha8Rng,
    bins: usize,
    position: f64,
    velocity: f64,
    previous_thrust: i32,
    steps: usize,
    done: bool,
}

impl MountainCarMo {
    pub const DEFAULT_HORIZON: usize = 5000;
    pub const DEFAULT_BINS: usize = 40;

    pub fn new(seed: u64) -> Self {
        Self::with_options(seed, Self::DEFAULT_HORIZON, Self::DEFAULT_BINS)
            .expect("defaults are valid")
    }

    pub fn with_options(seed: u64, horizon: usize, bins: usize) -> Result<Self, EnvError> {
        check_horizon(horizon)?;
        if bins == 0 {
            return Err(EnvError::InvalidParameter {
                key: "bins".into(),
                reason: "must be at least 1".into(),
            });
        }
        let mut env = Self {
            desc: EnvDescriptor {
                num_agents: 1,
                num_objectives: 3,
                action_space: vec![3],
                state_dim: 2,
                fully_observable: true,
                deterministic: false,
                discrete_states: Some(bins * bins),
                max_steps: horizon,
            },
            seed,
            clones: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            bins,
            position: 0.0,
            velocity: 0.0,
            previous_thrust: 0,
            steps: 0,
            done: false,
        };
        env.reset()?;
        Ok(env)
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    /// Overrides position and velocity; used to probe the dynamics.
    pub fn set_physical_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
    }

    pub fn thrust(action: usize) -> i32 {
        action as i32 - 1
    }

    /// Next (position, velocity) under the stated closed-form dynamics.
    pub fn dynamics(position: f64, velocity: f64, thrust: i32) -> (f64, f64) {
        let v = (velocity + POWER * thrust as f64 - GRAVITY * (3.0 * position).cos())
            .clamp(-MAX_SPEED, MAX_SPEED);
        let x = (position + v).clamp(MIN_POSITION, MAX_POSITION);
        (x, v)
    }

    fn bin(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
        let scaled = ((value - lo) / (hi - lo) * bins as f64).floor();
        (scaled.max(0.0) as usize).min(bins - 1)
    }

    pub fn discrete_index(&self) -> usize {
        let p = Self::bin(self.position, MIN_POSITION, MAX_POSITION, self.bins);
        let v = Self::bin(self.velocity, -MAX_SPEED, MAX_SPEED, self.bins);
        p * self.bins + v
    }
}

impl Environment for MountainCarMo {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.desc
    }

    fn clone_env(&mut self) -> Result<Box<dyn Environment>, EnvError> {
        let seed = derive_seed(self.seed, self.clones);
        self.clones += 1;
        let mut copy = self.clone();
        copy.seed = seed;
        copy.clones = 0;
        copy.rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Box::new(copy))
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        self.position = self.rng.gen_range(-0.6..=-0.4);
        self.velocity = 0.0;
        self.previous_thrust = 0;
        self.steps = 0;
        self.done = false;
        Ok(())
    }

    fn step(&mut self, actions: &ActionVector) -> Result<RewardVector, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        check_actions(&self.desc, actions)?;
        let thrust = Self::thrust(actions.0[0]);
        let (x, v) = Self::dynamics(self.position, self.velocity, thrust);
        self.position = x;
        self.velocity = v;
        let reversal = if thrust * self.previous_thrust < 0 { -1.0 } else { 0.0 };
        let effort = if thrust != 0 { -1.0 } else { 0.0 };
        self.previous_thrust = thrust;
        self.steps += 1;
        self.done = self.position >= GOAL_POSITION || self.steps >= self.desc.max_steps;
        Ok(RewardVector(vec![-1.0, reversal, effort]))
    }

    fn get_state(&mut self) -> Result<Vec<State>, EnvError> {
        Ok(vec![State {
            values: vec![self.position, self.velocity],
            agent_index: 0,
            discrete: Some(self.discrete_index()),
        }])
    }

    fn is_terminal(&mut self) -> Result<bool, EnvError> {
        Ok(self.done)
    }

    fn elapsed_steps(&self) -> usize {
        self.steps
    }
}
