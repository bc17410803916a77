//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlframe_core::net::{
    keys, Activation, DataDict, DenseLayer, Loss, Matrix, NetworkConfig, OptimizerConfig,
    PolicyNetwork,
};

// ---------------------------------------------------------------------------
// GridWorld oracle: a literal 16×4 lookup table and value iteration.

pub const GRID_ACTIONS: usize = 4;

/// Next cell index for (cell, action) on the 4×4 grid, written out by hand
/// from the rules: UP=0 (y-1), DOWN=1 (y+1), LEFT=2 (x-1), RIGHT=3 (x+1),
/// cells indexed `y*4 + x`, walls keep the agent in place.
pub const GRID_TABLE: [[usize; 4]; 16] = [
    // x=0..3, y=0
    [0, 4, 0, 1],
    [1, 5, 0, 2],
    [2, 6, 1, 3],
    [3, 7, 2, 3],
    // y=1
    [0, 8, 4, 5],
    [1, 9, 4, 6],
    [2, 10, 5, 7],
    [3, 11, 6, 7],
    // y=2
    [4, 12, 8, 9],
    [5, 13, 8, 10],
    [6, 14, 9, 11],
    [7, 15, 10, 11],
    // y=3
    [8, 12, 12, 13],
    [9, 13, 12, 14],
    [10, 14, 13, 15],
    [11, 15, 14, 15],
];

pub const GRID_GOAL: usize = 15;

pub fn grid_reward(next: usize) -> f64 {
    if next == GRID_GOAL {
        1.0
    } else {
        0.0
    }
}

/// Optimal action values of the goal-reaching MDP (goal absorbing, horizon
/// ignored).
pub fn grid_value_iteration(gamma: f64) -> [[f64; 4]; 16] {
    let mut v = [0.0f64; 16];
    loop {
        let mut delta: f64 = 0.0;
        for s in 0..16 {
            if s == GRID_GOAL {
                continue;
            }
            let best = (0..4)
                .map(|a| {
                    let n = GRID_TABLE[s][a];
                    grid_reward(n) + if n == GRID_GOAL { 0.0 } else { gamma * v[n] }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < 1e-14 {
            break;
        }
    }
    let mut q = [[0.0; 4]; 16];
    for s in 0..16 {
        for a in 0..4 {
            let n = GRID_TABLE[s][a];
            q[s][a] = grid_reward(n) + if n == GRID_GOAL { 0.0 } else { gamma * v[n] };
        }
    }
    q
}

/// Actions attaining the optimal value in `cell` (ties included).
pub fn grid_optimal_actions(q: &[[f64; 4]; 16], cell: usize) -> Vec<usize> {
    let best = q[cell].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..4).filter(|&a| (q[cell][a] - best).abs() < 1e-12).collect()
}

/// Follows `policy` from the start cell; returns the visited cells and
/// whether the goal was reached within `horizon` steps.
pub fn grid_rollout(policy: impl Fn(usize) -> usize, horizon: usize) -> (Vec<usize>, bool) {
    let mut cell = 0;
    let mut path = vec![cell];
    for _ in 0..horizon {
        cell = GRID_TABLE[cell][policy(cell)];
        path.push(cell);
        if cell == GRID_GOAL {
            return (path, true);
        }
    }
    (path, false)
}

// ---------------------------------------------------------------------------
// Straight-line forward pass and loss, used as the finite-difference oracle.

pub fn oracle_forward(layers: &[DenseLayer], params: &[Vec<f64>], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut a = x.to_vec();
    let mut z = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        let w = &params[2 * l];
        let b = &params[2 * l + 1];
        z = (0..layer.out_dim)
            .map(|j| b[j] + (0..layer.in_dim).map(|i| a[i] * w[i * layer.out_dim + j]).sum::<f64>())
            .collect();
        a = match layer.activation {
            Activation::Relu => z.iter().map(|v| if *v > 0.0 { *v } else { 0.0 }).collect(),
            Activation::Tanh => z.iter().map(|v| v.tanh()).collect(),
            Activation::Linear => z.clone(),
            Activation::Softmax => {
                let m = z.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|v| v / s).collect()
            }
        };
    }
    (a, z)
}

fn oracle_log_probs(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::MIN, f64::max);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

/// A gradient-check problem: one or two networks plus a batch.
pub struct GradProblem {
    pub configs: Vec<NetworkConfig>,
    pub states: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub returns: Vec<f64>,
    /// Seed for redrawing every parameter, biases included, so that no
    /// relu pre-activation sits exactly on its kink.
    pub param_seed: u64,
}

impl GradProblem {
    pub fn data(&self) -> DataDict {
        let mut d = DataDict::new();
        d.insert(keys::STATES, Matrix::from_rows(&self.states).unwrap()).unwrap();
        match self.configs[0].loss {
            Loss::Mse => {
                d.insert(keys::TARGETS, Matrix::from_rows(&self.targets).unwrap())
                    .unwrap();
            }
            Loss::CrossEntropy => {
                let a: Vec<f64> = self.actions.iter().map(|&a| a as f64).collect();
                d.insert(keys::ACTIONS, Matrix::column(&a)).unwrap();
            }
            Loss::A3cComposite { .. } => {
                let a: Vec<f64> = self.actions.iter().map(|&a| a as f64).collect();
                d.insert(keys::ACTIONS, Matrix::column(&a)).unwrap();
                d.insert(keys::RETURNS, Matrix::column(&self.returns)).unwrap();
            }
        }
        d
    }

    /// Loss from the straight-line oracle. `advantages` are held fixed for
    /// the actor-critic loss.
    pub fn oracle_loss(&self, params: &[Vec<Vec<f64>>], advantages: Option<&[f64]>) -> f64 {
        let b = self.states.len() as f64;
        match self.configs[0].loss {
            Loss::Mse => {
                let mut total = 0.0;
                for (x, t) in self.states.iter().zip(&self.targets) {
                    let (y, _) = oracle_forward(&self.configs[0].layers, &params[0], x);
                    total += y.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                }
                total / b
            }
            Loss::CrossEntropy => {
                let mut total = 0.0;
                for (x, &a) in self.states.iter().zip(&self.actions) {
                    let (_, z) = oracle_forward(&self.configs[0].layers, &params[0], x);
                    total -= oracle_log_probs(&z)[a];
                }
                total / b
            }
            Loss::A3cComposite {
                value_coef,
                entropy_coef,
            } => {
                let adv = advantages.expect("advantages required");
                let mut total = 0.0;
                for (i, x) in self.states.iter().enumerate() {
                    let (_, z) = oracle_forward(&self.configs[0].layers, &params[0], x);
                    let (v, _) = oracle_forward(&self.configs[1].layers, &params[1], x);
                    let lp = oracle_log_probs(&z);
                    let entropy: f64 = -lp.iter().map(|l| l.exp() * l).sum::<f64>();
                    let err = self.returns[i] - v[0];
                    total += -lp[self.actions[i]] * adv[i] + value_coef * err * err
                        - entropy_coef * entropy;
                }
                total / b
            }
        }
    }

    pub fn advantages(&self, params: &[Vec<Vec<f64>>]) -> Vec<f64> {
        self.states
            .iter()
            .zip(&self.returns)
            .map(|(x, r)| r - oracle_forward(&self.configs[1].layers, &params[1], x).0[0])
            .collect()
    }
}

pub fn network_params(net: &PolicyNetwork) -> Vec<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    let mut it = net.params().into_iter();
    for c in net.configs() {
        out.push((0..2 * c.layers.len()).map(|_| it.next().unwrap().data.clone()).collect());
    }
    out
}

pub const HIDDEN: [Activation; 3] = [Activation::Relu, Activation::Tanh, Activation::Linear];

/// Heads paired with the losses they support.
pub const HEADS: [(Activation, &str); 6] = [
    (Activation::Linear, "mse"),
    (Activation::Tanh, "mse"),
    (Activation::Relu, "mse"),
    (Activation::Softmax, "mse"),
    (Activation::Softmax, "cross_entropy"),
    (Activation::Softmax, "a3c_composite"),
];

fn random_layers(rng: &mut ChaCha8Rng, input: usize, output: usize, hidden: Activation, head: Activation) -> Vec<DenseLayer> {
    let depth = rng.gen_range(1..=2);
    let mut layers = Vec::new();
    let mut width = input;
    for _ in 0..depth {
        let next = rng.gen_range(2..=6);
        layers.push(DenseLayer {
            in_dim: width,
            out_dim: next,
            activation: hidden,
        });
        width = next;
    }
    layers.push(DenseLayer {
        in_dim: width,
        out_dim: output,
        activation: head,
    });
    layers
}

pub fn random_problem(trial: u64) -> GradProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
    let hidden = HIDDEN[trial as usize % HIDDEN.len()];
    let (head, loss) = HEADS[(trial as usize / HIDDEN.len()) % HEADS.len()];
    let input = rng.gen_range(2..=5);
    let output = rng.gen_range(2..=4);
    let batch = rng.gen_range(1..=4);
    let loss = match loss {
        "mse" => Loss::Mse,
        "cross_entropy" => Loss::CrossEntropy,
        _ => Loss::A3cComposite {
            value_coef: 0.5,
            entropy_coef: 0.01,
        },
    };
    let mut configs = vec![NetworkConfig {
        name: "main".into(),
        seed: trial,
        layers: random_layers(&mut rng, input, output, hidden, head),
        loss,
        optimizer: OptimizerConfig::sgd(0.01),
    }];
    if matches!(loss, Loss::A3cComposite { .. }) {
        configs.push(NetworkConfig {
            name: "critic".into(),
            seed: trial + 500,
            layers: random_layers(&mut rng, input, 1, hidden, Activation::Linear),
            loss: Loss::Mse,
            optimizer: OptimizerConfig::sgd(0.01),
        });
    }
    let states = (0..batch)
        .map(|_| (0..input).map(|_| rng.gen_range(-1.5..1.5)).collect())
        .collect();
    let targets = (0..batch)
        .map(|_| (0..output).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let actions = (0..batch).map(|_| rng.gen_range(0..output)).collect();
    let returns = (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
    GradProblem {
        configs,
        states,
        targets,
        actions,
        returns,
        param_seed: 7000 + trial,
    }
}

/// Floor on the denominator of the relative error, for components whose
/// true gradient is numerically zero.
pub const REL_ERR_FLOOR: f64 = 1e-4;

pub struct GradCheck {
    pub max_rel_err: f64,
    pub loss_gap: f64,
    pub components: usize,
}

/// Compares analytic gradients against central differences of the oracle
/// loss with step `h`.
pub fn gradient_check(problem: &GradProblem, h: f64) -> GradCheck {
    let mut net = PolicyNetwork::create_network(problem.configs.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(problem.param_seed);
    for t in net.params_mut() {
        t.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    let (loss, grads) = net.compute_gradients(&problem.data()).unwrap();
    let base = network_params(&net);
    let adv = matches!(problem.configs[0].loss, Loss::A3cComposite { .. })
        .then(|| problem.advantages(&base));
    let oracle_loss = problem.oracle_loss(&base, adv.as_deref());
    let mut max_rel_err: f64 = 0.0;
    let mut components = 0;
    for (n, net_grads) in grads.per_network.iter().enumerate() {
        for (t, g) in net_grads.iter().enumerate() {
            for i in 0..g.data.len() {
                let mut plus = base.clone();
                plus[n][t][i] += h;
                let mut minus = base.clone();
                minus[n][t][i] -= h;
                let numeric = (problem.oracle_loss(&plus, adv.as_deref())
                    - problem.oracle_loss(&minus, adv.as_deref()))
                    / (2.0 * h);
                let analytic = g.data[i];
                let denom = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
                max_rel_err = max_rel_err.max((analytic - numeric).abs() / denom);
                components += 1;
            }
        }
    }
    GradCheck {
        max_rel_err,
        loss_gap: (loss - oracle_loss).abs(),
        components,
    }
}

// ---------------------------------------------------------------------------
// Learner fixtures.

use rlframe_core::env::GridWorld;
use rlframe_core::learn::{create_learner, EpsilonSpec, Learner, LearnerSpec, MonitorSpec, QTable};

/// Tabular learner on GridWorld with β=0.1, γ=0.9 and ε decaying from 1.0
/// to 0.05, trained for up to `episodes` episodes.
pub fn gridworld_learner(algorithm: &str, episodes: u64, seed: u64) -> Box<dyn Learner> {
    let monitor = MonitorSpec {
        epochs: 1,
        steps_per_epoch: u64::MAX / 2,
        max_episodes: Some(episodes),
        eval_episodes: 1,
        ..Default::default()
    };
    let learner = LearnerSpec {
        algorithm: algorithm.into(),
        gamma: 0.9,
        learning_rate: 0.1,
        epsilon: EpsilonSpec {
            start: 1.0,
            end: 0.05,
            decay_steps: GRID_DECAY_STEPS,
        },
        seed,
        ..Default::default()
    };
    create_learner(monitor, learner, Box::new(GridWorld::new(seed)), None).unwrap()
}

pub const GRID_DECAY_STEPS: u64 = 20_000;

/// Outcome of comparing a learned table with value iteration.
#[derive(Debug)]
pub struct GridVerdict {
    /// Greedy action lies in the optimal set at every cell of the greedy path.
    pub path_optimal: bool,
    pub path_length: Option<usize>,
    /// Greedy action lies in the optimal set at every cell reachable under
    /// some optimal policy.
    pub reachable_optimal: bool,
}

pub fn grid_verdict(table: &QTable) -> GridVerdict {
    let q = grid_value_iteration(0.9);
    let greedy = |cell: usize| {
        let row: Vec<f64> = (0..4).map(|a| table.get(cell, a)[0]).collect();
        let mut best = 0;
        for a in 1..4 {
            if row[a] > row[best] {
                best = a;
            }
        }
        best
    };
    let (path, reached) = grid_rollout(greedy, 100);
    let path_optimal = path[..path.len() - 1]
        .iter()
        .all(|&c| grid_optimal_actions(&q, c).contains(&greedy(c)));
    let mut reachable = vec![0usize];
    let mut i = 0;
    while i < reachable.len() {
        let c = reachable[i];
        if c != GRID_GOAL {
            for a in grid_optimal_actions(&q, c) {
                let n = GRID_TABLE[c][a];
                if !reachable.contains(&n) {
                    reachable.push(n);
                }
            }
        }
        i += 1;
    }
    let reachable_optimal = reachable
        .iter()
        .filter(|&&c| c != GRID_GOAL)
        .all(|&c| grid_optimal_actions(&q, c).contains(&greedy(c)));
    GridVerdict {
        path_optimal,
        path_length: reached.then(|| path.len() - 1),
        reachable_optimal,
    }
}

use rlframe_core::env::{CartPole, MountainCarMo};

pub fn dense(in_dim: usize, out_dim: usize, activation: Activation) -> DenseLayer {
    DenseLayer {
        in_dim,
        out_dim,
        activation,
    }
}

/// Actor (tanh hidden, softmax head) and scalar critic for `inputs` → `actions`.
pub fn actor_critic(inputs: usize, hidden: usize, actions: usize, seed: u64) -> PolicyNetwork {
    let optimizer = OptimizerConfig {
        max_grad_norm: Some(5.0),
        ..OptimizerConfig::adam(1e-3)
    };
    let actor = NetworkConfig {
        name: "actor".into(),
        seed,
        layers: vec![dense(inputs, hidden, Activation::Tanh), dense(hidden, actions, Activation::Softmax)],
        loss: Loss::A3cComposite {
            value_coef: 0.5,
            entropy_coef: 0.01,
        },
        optimizer,
    };
    let critic = NetworkConfig {
        name: "critic".into(),
        seed: seed.wrapping_add(1),
        layers: vec![dense(inputs, hidden, Activation::Tanh), dense(hidden, 1, Activation::Linear)],
        loss: Loss::Mse,
        optimizer,
    };
    PolicyNetwork::create_network(vec![actor, critic]).unwrap()
}

/// A3C on CartPole with 5-step returns and entropy weight 0.01.
pub fn cartpole_a3c(threads: usize, steps: u64, seed: u64) -> Box<dyn Learner> {
    let monitor = MonitorSpec {
        epochs: 1,
        steps_per_epoch: steps,
        train_interval: 5,
        eval_episodes: 100,
        ..Default::default()
    };
    let learner = LearnerSpec {
        algorithm: "a3c".into(),
        gamma: 0.99,
        n_step: 5,
        threads,
        seed,
        ..Default::default()
    };
    create_learner(monitor, learner, Box::new(CartPole::new(seed)), Some(actor_critic(4, 64, 2, seed))).unwrap()
}

/// Tabular learner on the 40×40 MountainCar-MO grid with weights (1, 0, 0).
pub fn mountain_car_learner(algorithm: &str, steps: u64, seed: u64) -> Box<dyn Learner> {
    let monitor = MonitorSpec {
        epochs: 1,
        steps_per_epoch: steps,
        ..Default::default()
    };
    let learner = LearnerSpec {
        algorithm: algorithm.into(),
        gamma: 0.99,
        learning_rate: 0.1,
        epsilon: EpsilonSpec {
            start: 1.0,
            end: 0.05,
            decay_steps: steps / 2,
        },
        objective_weights: Some(vec![1.0, 0.0, 0.0]),
        seed,
        ..Default::default()
    };
    create_learner(monitor, learner, Box::new(MountainCarMo::new(seed)), None).unwrap()
}

/// Counts states visited by both tables and those where their greedy
/// actions under the given weights agree.
pub fn greedy_agreement(a: &QTable, wa: &[f64], b: &QTable, wb: &[f64]) -> (usize, usize) {
    let visited = |t: &QTable, s: usize| (0..t.actions()).any(|x| t.visits(s, x) > 0);
    let argmax = |row: Vec<f64>| {
        let mut best = 0;
        for i in 1..row.len() {
            if row[i] > row[best] {
                best = i;
            }
        }
        best
    };
    let mut both = 0;
    let mut agree = 0;
    for s in 0..a.states() {
        if visited(a, s) && visited(b, s) {
            both += 1;
            if argmax(a.scalar_row(s, wa)) == argmax(b.scalar_row(s, wb)) {
                agree += 1;
            }
        }
    }
    (both, agree)
}

// ---------------------------------------------------------------------------
// Frame decoder fuzzing.

use rlframe_core::wire::{decode_states, Frame};

/// Random bytes, and mutations of a valid frame, fed to the decoder.
/// Returns how many were accepted.
pub fn fuzz_decoder(cases: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let valid = Frame::request(9, "step", serde_json::json!({"actions": [0], "x": ["1.0e0"]})).encode();
    let mut accepted = 0;
    for i in 0..cases {
        let bytes: Vec<u8> = if i % 2 == 0 {
            let len = rng.gen_range(0..96);
            (0..len).map(|_| rng.gen()).collect()
        } else {
            let mut b = valid.clone().into_bytes();
            for _ in 0..rng.gen_range(1..6) {
                let at = rng.gen_range(0..b.len());
                match rng.gen_range(0..3) {
                    0 => b[at] = rng.gen(),
                    1 => {
                        b.remove(at);
                    }
                    _ => {
                        const ALPHABET: &[u8] = b"{}[]\",:0123456789eE.-\\u";
                        b.insert(at, ALPHABET[rng.gen_range(0..ALPHABET.len())]);
                    }
                }
                if b.is_empty() {
                    break;
                }
            }
            b
        };
        if let Ok(frame) = Frame::decode_bytes(&bytes) {
            accepted += 1;
            let _ = decode_states(&frame.payload);
        }
    }
    accepted
}
