//! Dense layer chain with hand-written forward and backward passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Activation, DenseLayer};
use super::data::Matrix;
use super::NetError;

/// A parameter tensor. Weights have shape `(in, out)`, biases `(out,)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs; `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    /// Pre-activations per layer.
    pre: Vec<Matrix>,
    pub output: Matrix,
}

impl ForwardCache {
    /// Pre-activation of the final layer (logits for softmax heads).
    pub fn logits(&self) -> &Matrix {
        self.pre.last().expect("at least one layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    /// `[w0, b0, w1, b1, ...]`
    params: Vec<Tensor>,
}

impl Mlp {
    /// He-uniform weights for relu layers, Xavier-uniform otherwise; zero
    /// biases.
    pub fn init(layers: &[DenseLayer], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(layers.len() * 2);
        for layer in layers {
            let (fan_in, fan_out) = (layer.in_dim as f64, layer.out_dim as f64);
            let limit = match layer.activation {
                Activation::Relu => (6.0 / fan_in).sqrt(),
                _ => (6.0 / (fan_in + fan_out)).sqrt(),
            };
            let mut w = Tensor::zeros(&[layer.in_dim, layer.out_dim]);
            for v in w.data.iter_mut() {
                *v = rng.gen_range(-limit..limit);
            }
            params.push(w);
            params.push(Tensor::zeros(&[layer.out_dim]));
        }
        Self {
            layers: layers.to_vec(),
            params,
        }
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn forward(&self, input: &Matrix) -> Result<ForwardCache, NetError> {
        if input.cols != self.input_dim() {
            return Err(NetError::Shape(format!(
                "input has {} features, network expects {}",
                input.cols,
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let w = &self.params[2 * l];
            let b = &self.params[2 * l + 1];
            let mut z = Matrix::zeros(current.rows, layer.out_dim);
            for r in 0..current.rows {
                let x = current.row(r);
                let out = z.row_mut(r);
                out.copy_from_slice(&b.data);
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let wrow = &w.data[i * layer.out_dim..(i + 1) * layer.out_dim];
                    for (o, &wij) in out.iter_mut().zip(wrow) {
                        *o += xi * wij;
                    }
                }
            }
            let a = activate(&z, layer.activation);
            inputs.push(current);
            pre.push(z);
            current = a;
        }
        Ok(ForwardCache {
            inputs,
            pre,
            output: current,
        })
    }

    /// Backpropagates a gradient with respect to the final pre-activation.
    /// Returns parameter gradients in the same order as [`Mlp::params`].
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Matrix) -> Vec<Tensor> {
        let mut grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(&p.shape)).collect();
        let mut dz = grad_logits.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = self.layers[l];
            let input = &cache.inputs[l];
            {
                let (gw, rest) = grads[2 * l..].split_at_mut(1);
                let gw = &mut gw[0];
                let gb = &mut rest[0];
                for r in 0..input.rows {
                    let x = input.row(r);
                    let d = dz.row(r);
                    for (i, &xi) in x.iter().enumerate() {
                        if xi == 0.0 {
                            continue;
                        }
                        let row = &mut gw.data[i * layer.out_dim..(i + 1) * layer.out_dim];
                        for (g, &dj) in row.iter_mut().zip(d) {
                            *g += xi * dj;
                        }
                    }
                    for (g, &dj) in gb.data.iter_mut().zip(d) {
                        *g += dj;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[2 * l];
            let below = &self.layers[l - 1];
            let prev_pre = &cache.pre[l - 1];
            let prev_out = &cache.inputs[l];
            let mut dprev = Matrix::zeros(dz.rows, layer.in_dim);
            for r in 0..dz.rows {
                let d = dz.row(r);
                let out = dprev.row_mut(r);
                for (i, o) in out.iter_mut().enumerate() {
                    let wrow = &w.data[i * layer.out_dim..(i + 1) * layer.out_dim];
                    *o = wrow.iter().zip(d).map(|(a, b)| a * b).sum();
                }
                let z = prev_pre.row(r);
                let a = prev_out.row(r);
                for i in 0..out.len() {
                    out[i] *= match below.activation {
                        Activation::Relu => {
                            if z[i] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Activation::Tanh => 1.0 - a[i] * a[i],
                        Activation::Linear => 1.0,
                        Activation::Softmax => unreachable!("softmax is head-only"),
                    };
                }
            }
            dz = dprev;
        }
        grads
    }
}

fn activate(z: &Matrix, activation: Activation) -> Matrix {
    let mut a = z.clone();
    match activation {
        Activation::Relu => a.data.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Tanh => a.data.iter_mut().for_each(|v| *v = v.tanh()),
        Activation::Linear => {}
        Activation::Softmax => {
            for r in 0..a.rows {
                softmax_in_place(a.row_mut(r));
            }
        }
    }
    a
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `log softmax` of a logit row.
pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

/// Converts a gradient with respect to activated outputs into one with
/// respect to pre-activations.
pub fn output_to_logit_grad(cache: &ForwardCache, head: Activation, grad_out: &Matrix) -> Matrix {
    let z = cache.logits();
    let y = &cache.output;
    let mut g = grad_out.clone();
    for r in 0..g.rows {
        let gr = g.row_mut(r);
        match head {
            Activation::Relu => {
                for (gi, &zi) in gr.iter_mut().zip(z.row(r)) {
                    if zi <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            Activation::Tanh => {
                for (gi, &yi) in gr.iter_mut().zip(y.row(r)) {
                    *gi *= 1.0 - yi * yi;
                }
            }
            Activation::Linear => {}
            Activation::Softmax => {
                let yr = y.row(r);
                let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                for (gi, &yi) in gr.iter_mut().zip(yr) {
                    *gi = yi * (*gi - dot);
                }
            }
        }
    }
    g
}
