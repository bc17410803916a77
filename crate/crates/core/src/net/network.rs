use crate::env::State;

use super::config::{Activation, Loss, NetworkConfig};
use super::data::{keys, DataDict, Matrix};
use super::dense::{log_softmax, output_to_logit_grad, ForwardCache, Mlp, Tensor};
use super::optim::OptimizerState;
use super::NetError;

/// Gradients for every parameter tensor, grouped by network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub per_network: Vec<Vec<Tensor>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<&Tensor> {
        self.per_network.iter().flatten().collect()
    }
}

/// One or more dense networks sharing a training step.
///
/// When the first configuration uses the `a3c_composite` loss, the second
/// configuration is its critic and both are trained jointly from
/// `states`, `actions` and `returns`. Otherwise every network is trained by
/// its own loss, reading `<name>.targets` / `<name>.actions` when present
/// and the bare keys otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    configs: Vec<NetworkConfig>,
    nets: Vec<Mlp>,
    optimizers: Vec<OptimizerState>,
    step_counter: u64,
}

impl PolicyNetwork {
    /// Instantiates parameters for the given configurations. An actor
    /// (`a3c_composite`) configuration is moved to the front so its tensors
    /// come first.
    pub fn create_network(configs: Vec<NetworkConfig>) -> Result<Self, NetError> {
        if configs.is_empty() {
            return Err(NetError::Validation {
                path: "configs".into(),
                message: "at least one network configuration is required".into(),
            });
        }
        for c in &configs {
            c.validate()?;
        }
        let is_actor = |c: &NetworkConfig| matches!(c.loss, Loss::A3cComposite { .. });
        let (mut ordered, rest): (Vec<_>, Vec<_>) = configs.into_iter().partition(is_actor);
        if ordered.len() > 1 {
            return Err(NetError::Validation {
                path: "configs".into(),
                message: "only one a3c_composite actor is supported".into(),
            });
        }
        ordered.extend(rest);
        if is_actor(&ordered[0]) {
            if ordered.len() != 2 {
                return Err(NetError::Validation {
                    path: "configs".into(),
                    message: "an a3c_composite actor needs exactly one critic".into(),
                });
            }
            let (actor, critic) = (&ordered[0], &ordered[1]);
            if critic.output_dim() != 1 || critic.head() == Activation::Softmax {
                return Err(NetError::Validation {
                    path: format!("{}.layers", critic.name),
                    message: "critic must end in a single non-softmax output".into(),
                });
            }
            if critic.input_dim() != actor.input_dim() {
                return Err(NetError::Validation {
                    path: format!("{}.layers[0].in", critic.name),
                    message: format!(
                        "critic input {} differs from actor input {}",
                        critic.input_dim(),
                        actor.input_dim()
                    ),
                });
            }
        }
        let nets: Vec<Mlp> = ordered.iter().map(|c| Mlp::init(&c.layers, c.seed)).collect();
        let optimizers = ordered
            .iter()
            .zip(&nets)
            .map(|(c, n)| OptimizerState::new(&c.optimizer, n.params()))
            .collect();
        Ok(Self {
            configs: ordered,
            nets,
            optimizers,
            step_counter: 0,
        })
    }

    pub fn configs(&self) -> &[NetworkConfig] {
        &self.configs
    }

    /// All parameter tensors, network by network, weight before bias.
    pub fn params(&self) -> Vec<&Tensor> {
        self.nets.iter().flat_map(|n| n.params()).collect()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.nets.iter_mut().flat_map(|n| n.params_mut().iter_mut())
    }

    pub(crate) fn nets(&self) -> &[Mlp] {
        &self.nets
    }

    pub(crate) fn optimizers(&self) -> &[OptimizerState] {
        &self.optimizers
    }

    pub(crate) fn restore(&mut self, params: Vec<Tensor>, optimizers: Vec<OptimizerState>, step: u64) {
        let mut it = params.into_iter();
        for net in &mut self.nets {
            for p in net.params_mut() {
                *p = it.next().expect("shapes checked by caller");
            }
        }
        self.optimizers = optimizers;
        self.step_counter = step;
    }

    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn is_actor_critic(&self) -> bool {
        matches!(self.configs[0].loss, Loss::A3cComposite { .. })
    }

    pub fn input_dim(&self) -> usize {
        self.configs[0].input_dim()
    }

    /// Output width of the primary (first) network.
    pub fn output_dim(&self) -> usize {
        self.configs[0].output_dim()
    }

    pub fn set_learning_rate(&mut self, network: usize, learning_rate: f64) {
        self.configs[network].optimizer.learning_rate = learning_rate;
    }

    /// Forward pass of the primary network, one output row per state.
    pub fn predict(&self, states: &[State]) -> Result<Vec<Vec<f64>>, NetError> {
        let rows: Vec<&[f64]> = states.iter().map(|s| s.values.as_slice()).collect();
        Ok(self.forward(0, &Matrix::from_rows(&rows)?)?.to_rows())
    }

    /// Forward pass of one network over a batch.
    pub fn forward(&self, network: usize, input: &Matrix) -> Result<Matrix, NetError> {
        Ok(self.nets[network].forward(input)?.output)
    }

    /// State values from the critic of an actor-critic pair.
    pub fn values(&self, input: &Matrix) -> Result<Vec<f64>, NetError> {
        if !self.is_actor_critic() {
            return Err(NetError::Validation {
                path: "configs".into(),
                message: "network has no critic".into(),
            });
        }
        Ok(self.forward(1, input)?.data)
    }

    /// Loss and gradients of one batch without touching parameters.
    pub fn compute_gradients(&self, data: &DataDict) -> Result<(f64, Gradients), NetError> {
        if self.is_actor_critic() {
            let (loss, actor, critic) = self.a3c_gradients(data)?;
            return Ok((
                loss,
                Gradients {
                    per_network: vec![actor, critic],
                },
            ));
        }
        let states = data.require(keys::STATES)?;
        let mut total = 0.0;
        let mut per_network = Vec::with_capacity(self.nets.len());
        for (config, net) in self.configs.iter().zip(&self.nets) {
            let cache = net.forward(states)?;
            let (loss, grad_logits) = match config.loss {
                Loss::Mse => {
                    let targets = data.require_scoped(&config.name, keys::TARGETS)?;
                    mse(&cache, config.head(), targets)?
                }
                Loss::CrossEntropy => {
                    let actions = scoped_actions(data, &config.name, config.output_dim())?;
                    cross_entropy(&cache, &actions)
                }
                Loss::A3cComposite { .. } => unreachable!("actor is always first"),
            };
            total += loss;
            per_network.push(net.backward(&cache, &grad_logits));
        }
        Ok((total, Gradients { per_network }))
    }

    fn a3c_gradients(&self, data: &DataDict) -> Result<(f64, Vec<Tensor>, Vec<Tensor>), NetError> {
        let Loss::A3cComposite {
            value_coef,
            entropy_coef,
        } = self.configs[0].loss
        else {
            unreachable!()
        };
        let states = data.require(keys::STATES)?;
        let actions = data.actions(keys::ACTIONS, self.configs[0].output_dim())?;
        let returns = data.require(keys::RETURNS)?;
        if returns.cols != 1 || returns.rows != states.rows || actions.len() != states.rows {
            return Err(NetError::Shape("a3c batch arrays disagree".into()));
        }
        let batch = states.rows as f64;
        let actor = self.nets[0].forward(states)?;
        let critic = self.nets[1].forward(states)?;
        let logits = actor.logits();
        let probs = &actor.output;
        let mut g_actor = Matrix::zeros(logits.rows, logits.cols);
        let mut g_value = Matrix::zeros(states.rows, 1);
        let mut loss = 0.0;
        for r in 0..states.rows {
            let value = critic.output.data[r];
            let ret = returns.data[r];
            let advantage = ret - value;
            let logp = log_softmax(logits.row(r));
            let p = probs.row(r);
            let entropy: f64 = -p.iter().zip(&logp).map(|(pi, li)| pi * li).sum::<f64>();
            let a = actions[r];
            loss += (-logp[a] * advantage + value_coef * advantage * advantage
                - entropy_coef * entropy)
                / batch;
            let g = g_actor.row_mut(r);
            for k in 0..g.len() {
                let onehot = if k == a { 1.0 } else { 0.0 };
                g[k] = (advantage * (p[k] - onehot) + entropy_coef * p[k] * (logp[k] + entropy))
                    / batch;
            }
            g_value.data[r] = -2.0 * value_coef * advantage / batch;
        }
        let g_value = output_to_logit_grad(&critic, self.configs[1].head(), &g_value);
        Ok((
            loss,
            self.nets[0].backward(&actor, &g_actor),
            self.nets[1].backward(&critic, &g_value),
        ))
    }

    /// Applies gradients with each network's optimizer and bumps the step
    /// counter.
    pub fn apply_gradients(&mut self, grads: &Gradients) {
        for ((net, opt), (config, g)) in self
            .nets
            .iter_mut()
            .zip(self.optimizers.iter_mut())
            .zip(self.configs.iter().zip(&grads.per_network))
        {
            opt.apply(&config.optimizer, net.params_mut(), g);
        }
        self.step_counter += 1;
    }

    /// One optimizer step on a batch; returns the pre-step loss.
    pub fn train_network(&mut self, data: &DataDict) -> Result<f64, NetError> {
        let (loss, grads) = self.compute_gradients(data)?;
        self.apply_gradients(&grads);
        Ok(loss)
    }
}

fn scoped_actions(data: &DataDict, scope: &str, limit: usize) -> Result<Vec<usize>, NetError> {
    let scoped = format!("{scope}.{}", keys::ACTIONS);
    if data.get(&scoped).is_some() {
        data.actions(&scoped, limit)
    } else {
        data.actions(keys::ACTIONS, limit)
    }
}

fn mse(cache: &ForwardCache, head: Activation, targets: &Matrix) -> Result<(f64, Matrix), NetError> {
    let y = &cache.output;
    if targets.rows != y.rows || targets.cols != y.cols {
        return Err(NetError::Shape(format!(
            "targets are {}x{}, outputs are {}x{}",
            targets.rows, targets.cols, y.rows, y.cols
        )));
    }
    let batch = y.rows as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(y.rows, y.cols);
    for i in 0..y.data.len() {
        let diff = y.data[i] - targets.data[i];
        loss += diff * diff / batch;
        grad.data[i] = 2.0 * diff / batch;
    }
    Ok((loss, output_to_logit_grad(cache, head, &grad)))
}

fn cross_entropy(cache: &ForwardCache, actions: &[usize]) -> (f64, Matrix) {
    let logits = cache.logits();
    let batch = logits.rows as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(logits.rows, logits.cols);
    for r in 0..logits.rows {
        let logp = log_softmax(logits.row(r));
        loss -= logp[actions[r]] / batch;
        let p = cache.output.row(r);
        let g = grad.row_mut(r);
        for k in 0..g.len() {
            g[k] = (p[k] - if k == actions[r] { 1.0 } else { 0.0 }) / batch;
        }
    }
    (loss, grad)
}
