use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    check_actions, check_horizon, derive_seed, ActionVector, EnvDescriptor, EnvError,
    Environment, RewardVector, State,
};

const GRAVITY: f64 = 9.8;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const TOTAL_MASS: f64 = CART_MASS + POLE_MASS;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = POLE_MASS * HALF_LENGTH;
const FORCE: f64 = 10.0;
const DT: f64 = 0.02;
const X_LIMIT: f64 = 2.4;
/// 12 degrees.
pub(crate) const ANGLE_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
const INIT_RANGE: f64 = 0.05;

/// Cart-pole balancing with explicit Euler integration.
///
/// State is `[x, x_dot, theta, theta_dot]`; action 0 pushes left, 1 pushes
/// right. Reward is +1 per step, including the failing one.
#[derive(Debug, Clone)]
pub struct CartPole {
    desc: EnvDescriptor,
    seed: u64,
    clones: u64,
    rng: ChaCha8Rng,
    state: [f64; 4],
    steps: usize,
    done: bool,
}

impl CartPole {
    pub const DEFAULT_HORIZON: usize = 500;

    pub fn new(seed: u64) -> Self {
        Self::with_horizon(seed, Self::DEFAULT_HORIZON).expect("default horizon is valid")
    }

    pub fn with_horizon(seed: u64, horizon: usize) -> Result<Self, EnvError> {
        check_horizon(horizon)?;
        let mut env = Self {
            desc: EnvDescriptor {
                num_agents: 1,
                num_objectives: 1,
                action_space: vec![2],
                state_dim: 4,
                fully_observable: true,
                deterministic: false,
                discrete_states: None,
                max_steps: horizon,
            },
            seed,
            clones: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: [0.0; 4],
            steps: 0,
            done: false,
        };
        env.reset()?;
        Ok(env)
    }

    pub fn physical_state(&self) -> [f64; 4] {
        self.state
    }

    /// One Euler step of the cart-pole equations of motion.
    pub fn dynamics(state: [f64; 4], action: usize) -> [f64; 4] {
        let [x, x_dot, theta, theta_dot] = state;
        let force = if action == 1 { FORCE } else { -FORCE };
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
        [
            x + DT * x_dot,
            x_dot + DT * x_acc,
            theta + DT * theta_dot,
            theta_dot + DT * theta_acc,
        ]
    }

    pub fn failed(state: [f64; 4]) -> bool {
        state[0].abs() > X_LIMIT || state[2].abs() > ANGLE_LIMIT
    }
}

impl Environment for CartPole {
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
        for v in self.state.iter_mut() {
            *v = self.rng.gen_range(-INIT_RANGE..=INIT_RANGE);
        }
        self.steps = 0;
        self.done = false;
        Ok(())
    }

    fn step(&mut self, actions: &ActionVector) -> Result<RewardVector, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        check_actions(&self.desc, actions)?;
        self.state = Self::dynamics(self.state, actions.0[0]);
        self.steps += 1;
        self.done = Self::failed(self.state) || self.steps >= self.desc.max_steps;
        Ok(RewardVector(vec![1.0]))
    }

    fn get_state(&mut self) -> Result<Vec<State>, EnvError> {
        Ok(vec![State {
            values: self.state.to_vec(),
            agent_index: 0,
            discrete: None,
        }])
    }

    fn is_terminal(&mut self) -> Result<bool, EnvError> {
        Ok(self.done)
    }

    fn elapsed_steps(&self) -> usize {
        self.steps
    }
}
