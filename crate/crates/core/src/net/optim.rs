use super::config::{OptimizerConfig, OptimizerKind};
use super::dense::Tensor;

/// Per-network optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Sgd,
    Adam {
        t: u64,
        m: Vec<Tensor>,
        v: Vec<Tensor>,
    },
}

impl OptimizerState {
    pub fn new(config: &OptimizerConfig, params: &[Tensor]) -> Self {
        match config.kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam { .. } => OptimizerState::Adam {
                t: 0,
                m: params.iter().map(|p| Tensor::zeros(&p.shape)).collect(),
                v: params.iter().map(|p| Tensor::zeros(&p.shape)).collect(),
            },
        }
    }

    /// Applies one update in place.
    pub fn apply(&mut self, config: &OptimizerConfig, params: &mut [Tensor], grads: &[Tensor]) {
        let lr = config.learning_rate;
        let scale = match config.max_grad_norm {
            Some(limit) => {
                let norm = grads
                    .iter()
                    .flat_map(|g| g.data.iter())
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                if norm > limit {
                    limit / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        match (self, config.kind) {
            (OptimizerState::Sgd, _) => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pi, &gi) in p.data.iter_mut().zip(&g.data) {
                        *pi -= lr * (gi * scale);
                    }
                }
            }
            (
                OptimizerState::Adam { t, m, v },
                OptimizerKind::Adam {
                    beta1,
                    beta2,
                    epsilon,
                },
            ) => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t as i32);
                let c2 = 1.0 - beta2.powi(*t as i32);
                for ((p, g), (mt, vt)) in params.iter_mut().zip(grads).zip(m.iter_mut().zip(v.iter_mut())) {
                    for i in 0..p.data.len() {
                        let gi = g.data[i] * scale;
                        mt.data[i] = beta1 * mt.data[i] + (1.0 - beta1) * gi;
                        vt.data[i] = beta2 * vt.data[i] + (1.0 - beta2) * gi * gi;
                        let m_hat = mt.data[i] / c1;
                        let v_hat = vt.data[i] / c2;
                        p.data[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
            (OptimizerState::Adam { .. }, OptimizerKind::Sgd) => {
                unreachable!("optimizer state built from a different config")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let cfg = OptimizerConfig::adam(0.01);
        let mut params = vec![Tensor {
            shape: vec![2],
            data: vec![1.0, -1.0],
        }];
        let grads = vec![Tensor {
            shape: vec![2],
            data: vec![3.0, -0.5],
        }];
        let mut state = OptimizerState::new(&cfg, &params);
        state.apply(&cfg, &mut params, &grads);
        // Bias-corrected first step is lr * sign(g) up to epsilon.
        assert!((params[0].data[0] - 0.99).abs() < 1e-8);
        assert!((params[0].data[1] + 0.99).abs() < 1e-8);
    }

    #[test]
    fn clipping_bounds_step() {
        let mut cfg = OptimizerConfig::sgd(1.0);
        cfg.max_grad_norm = Some(1.0);
        let mut params = vec![Tensor::zeros(&[2])];
        let grads = vec![Tensor {
            shape: vec![2],
            data: vec![3.0, 4.0],
        }];
        OptimizerState::new(&cfg, &params).apply(&cfg, &mut params, &grads);
        assert!((params[0].norm() - 1.0).abs() < 1e-12);
    }
}
