//! Small fully connected network: encoding -> 32 -> 32 -> K.
//!
//! Weights of each layer are stored input-major (`w[i * out + o]`) so the
//! forward pass and the weight-gradient update are plain axpy loops.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::Rng;

/// Largest output layer supported in per-light mode.
pub const MAX_OUTPUTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Sigmoid,
    LeakyRelu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub leaky_slope: f64,
    pub output_activation: OutputActivation,
    /// Lower bound on the sigmoid derivative used in the backward pass.
    /// Zero gives the exact L2 gradient. A positive floor keeps saturated
    /// outputs trainable: the derivative is a function of the prediction
    /// alone, so the minimizer at each input is still the mean target.
    #[serde(default)]
    pub sigmoid_grad_floor: f64,
}

impl MlpConfig {
    /// Two hidden layers of 32 neurons with slope-0.01 leaky ReLU.
    pub fn new(input_dim: usize, output_dim: usize, output_activation: OutputActivation) -> Self {
        MlpConfig { input_dim, hidden_dims: vec![32, 32], output_dim, leaky_slope: 0.01, output_activation, sigmoid_grad_floor: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 || self.output_dim < 1 || self.hidden_dims.iter().any(|&d| d < 1) {
            return Err(Error::Config("network dimensions must be at least 1".into()));
        }
        if self.output_dim > MAX_OUTPUTS {
            return Err(Error::Config(format!(
                "network output dimension {} exceeds the supported maximum of {MAX_OUTPUTS}",
                self.output_dim
            )));
        }
        if !(self.leaky_slope > 0.0) {
            return Err(Error::Config("leaky ReLU slope must be positive".into()));
        }
        if !(0.0..=0.25).contains(&self.sigmoid_grad_floor) {
            return Err(Error::Config("sigmoid gradient floor must lie in [0, 0.25]".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` per layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in self.hidden_dims.iter().chain(std::iter::once(&self.output_dim)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerLayout {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
}

#[inline]
pub fn leaky_relu<T: Real>(x: T, slope: T) -> T {
    if x > T::zero() {
        x
    } else {
        x * slope
    }
}

/// Logistic function, kept strictly inside (0, 1) even where the exact
/// value rounds to 0 or 1 in the working precision.
#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    let s = T::one() / (T::one() + (-x).exp());
    let lo = T::min_positive_value();
    let hi = T::one() - T::epsilon() * T::of(0.5);
    if s < lo {
        lo
    } else if s > hi {
        hi
    } else {
        s
    }
}

/// Cached activations of one forward pass, reusable across calls.
#[derive(Debug, Clone, Default)]
pub struct ForwardPass<T> {
    /// `inputs[l]` is the input of layer `l`; the final entry is the network output.
    pub inputs: Vec<Vec<T>>,
    /// Pre-activations per layer.
    pub pre: Vec<Vec<T>>,
}

impl<T: Real> ForwardPass<T> {
    pub fn output(&self) -> &[T] {
        self.inputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub params: Vec<T>,
    pub input: Vec<T>,
    pub loss: T,
}

#[derive(Debug, Clone)]
pub struct Mlp<T: Real> {
    cfg: MlpConfig,
    layout: Vec<LayerLayout>,
    params: Vec<T>,
}

impl<T: Real> Mlp<T> {
    pub fn zeroed(cfg: MlpConfig) -> Result<Self> {
        cfg.validate()?;
        let mut layout = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out) in cfg.layer_dims() {
            layout.push(LayerLayout { fan_in, fan_out, weights: offset, bias: offset + fan_in * fan_out });
            offset += fan_in * fan_out + fan_out;
        }
        Ok(Mlp { cfg, layout, params: vec![T::zero(); offset] })
    }

    /// He initialization: weights ~ N(0, sqrt(2 / fan_in)), zero biases.
    pub fn he_init(cfg: MlpConfig, rng: &mut Rng) -> Result<Self> {
        let mut mlp = Mlp::zeroed(cfg)?;
        for l in mlp.layout.clone() {
            let normal = Normal::new(0.0, (2.0 / l.fan_in as f64).sqrt()).expect("positive std");
            for w in &mut mlp.params[l.weights..l.bias] {
                *w = T::of(normal.sample(rng));
            }
        }
        Ok(mlp)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn layer_count(&self) -> usize {
        self.layout.len()
    }

    /// Weight `(input i -> output o)` of layer `l`.
    pub fn weight(&self, l: usize, i: usize, o: usize) -> T {
        let lay = self.layout[l];
        self.params[lay.weights + i * lay.fan_out + o]
    }

    pub fn weight_index(&self, l: usize, i: usize, o: usize) -> usize {
        let lay = self.layout[l];
        lay.weights + i * lay.fan_out + o
    }

    pub fn bias_index(&self, l: usize, o: usize) -> usize {
        self.layout[l].bias + o
    }

    pub fn new_pass(&self) -> ForwardPass<T> {
        let mut pass = ForwardPass::default();
        for l in &self.layout {
            pass.inputs.push(vec![T::zero(); l.fan_in]);
            pass.pre.push(vec![T::zero(); l.fan_out]);
        }
        pass.inputs.push(vec![T::zero(); self.cfg.output_dim]);
        pass
    }

    /// Forward pass into a reusable buffer. Rejects non-finite inputs.
    pub fn forward_into(&self, x: &[T], pass: &mut ForwardPass<T>) -> Result<()> {
        if x.len() != self.cfg.input_dim {
            return Err(Error::Dimension(format!("expected {} features, got {}", self.cfg.input_dim, x.len())));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(i));
        }
        if pass.inputs.len() != self.layout.len() + 1 {
            *pass = self.new_pass();
        }
        pass.inputs[0].copy_from_slice(x);
        self.propagate(pass);
        Ok(())
    }

    /// Forward pass without input validation, for hot loops fed by the encoder.
    pub(crate) fn propagate(&self, pass: &mut ForwardPass<T>) {
        let slope = T::of(self.cfg.leaky_slope);
        let last = self.layout.len() - 1;
        for (l, lay) in self.layout.iter().enumerate() {
            let (head, tail) = pass.inputs.split_at_mut(l + 1);
            let input = &head[l];
            let pre = &mut pass.pre[l];
            pre.copy_from_slice(&self.params[lay.bias..lay.bias + lay.fan_out]);
            let w = &self.params[lay.weights..lay.bias];
            for (i, &xi) in input.iter().enumerate() {
                let row = &w[i * lay.fan_out..(i + 1) * lay.fan_out];
                for (z, &wv) in pre.iter_mut().zip(row) {
                    *z += wv * xi;
                }
            }
            let out = &mut tail[0];
            if l == last && self.cfg.output_activation == OutputActivation::Sigmoid {
                for (o, &z) in out.iter_mut().zip(pre.iter()) {
                    *o = sigmoid(z);
                }
            } else {
                for (o, &z) in out.iter_mut().zip(pre.iter()) {
                    *o = leaky_relu(z, slope);
                }
            }
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<ForwardPass<T>> {
        let mut pass = self.new_pass();
        self.forward_into(x, &mut pass)?;
        Ok(pass)
    }

    /// Backpropagates `scale * (1/K) Σ mask_k (out_k - target_k)²`, adding parameter
    /// gradients into `grad` and writing the input gradient into `input_grad`.
    /// Returns the unscaled loss. `delta` and `next` are scratch buffers.
    #[allow(clippy::too_many_arguments)]
    pub fn backward_l2_into(
        &self,
        pass: &ForwardPass<T>,
        target: &[T],
        mask: Option<&[bool]>,
        scale: T,
        grad: &mut [T],
        input_grad: &mut [T],
        delta: &mut Vec<T>,
        next: &mut Vec<T>,
    ) -> T {
        let k = self.cfg.output_dim;
        let slope = T::of(self.cfg.leaky_slope);
        let out = pass.output();
        let inv_k = T::one() / T::of(k as f64);
        let two = T::of(2.0);
        let floor = T::of(self.cfg.sigmoid_grad_floor);
        let mut loss = T::zero();
        delta.clear();
        delta.resize(k, T::zero());
        let last = self.layout.len() - 1;
        for o in 0..k {
            if mask.is_none_or(|m| m[o]) {
                let diff = out[o] - target[o];
                loss += diff * diff * inv_k;
                let d_act = match self.cfg.output_activation {
                    OutputActivation::Sigmoid => {
                        let d = out[o] * (T::one() - out[o]);
                        if d < floor {
                            floor
                        } else {
                            d
                        }
                    }
                    OutputActivation::LeakyRelu => {
                        if pass.pre[last][o] > T::zero() {
                            T::one()
                        } else {
                            slope
                        }
                    }
                };
                delta[o] = two * diff * inv_k * d_act * scale;
            }
        }
        for l in (0..self.layout.len()).rev() {
            let lay = self.layout[l];
            let input = &pass.inputs[l];
            for (g, &d) in grad[lay.bias..lay.bias + lay.fan_out].iter_mut().zip(delta.iter()) {
                *g += d;
            }
            let w = &self.params[lay.weights..lay.bias];
            let gw = &mut grad[lay.weights..lay.bias];
            next.clear();
            next.resize(lay.fan_in, T::zero());
            for (i, &xi) in input.iter().enumerate() {
                let row = &w[i * lay.fan_out..(i + 1) * lay.fan_out];
                let grow = &mut gw[i * lay.fan_out..(i + 1) * lay.fan_out];
                let mut acc = T::zero();
                for ((g, &wv), &d) in grow.iter_mut().zip(row).zip(delta.iter()) {
                    *g += xi * d;
                    acc += wv * d;
                }
                next[i] = acc;
            }
            if l > 0 {
                // through the hidden activation that produced this layer's input
                for (n, &z) in next.iter_mut().zip(&pass.pre[l - 1]) {
                    if !(z > T::zero()) {
                        *n *= slope;
                    }
                }
            }
            std::mem::swap(delta, next);
        }
        input_grad.copy_from_slice(delta);
        loss
    }

    /// Exact gradients of `(1/K) Σ mask_k (out_k - target_k)²` for one example.
    pub fn backward_l2(&self, pass: &ForwardPass<T>, target: &[T], mask: Option<&[bool]>) -> Gradients<T> {
        let mut params = vec![T::zero(); self.params.len()];
        let mut input = vec![T::zero(); self.cfg.input_dim];
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let loss = self.backward_l2_into(pass, target, mask, T::one(), &mut params, &mut input, &mut a, &mut b);
        Gradients { params, input, loss }
    }
}

/// Linear warm-down schedule followed by a constant learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_start: f64,
    pub lr_end: f64,
    pub warm_steps: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule { lr_start: 0.05, lr_end: 0.001, warm_steps: 200 }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end) || self.warm_steps < 1 {
            return Err(Error::Config("learning-rate schedule needs lr_start >= lr_end > 0 and warm_steps >= 1".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        if step >= self.warm_steps {
            return self.lr_end;
        }
        let t = step.min(self.warm_steps) as f64 / self.warm_steps as f64;
        self.lr_start + (self.lr_end - self.lr_start) * t
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![T::zero(); len], v: vec![T::zero(); len], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: f64) {
        self.update(params, grads, lr, false);
    }

    /// Like [`AdamState::step`], but parameters whose gradient is exactly
    /// zero keep both their value and their moments. Meant for sparsely
    /// touched tables, where stale momentum would otherwise keep moving
    /// entries that no training example reached.
    pub fn step_sparse(&mut self, params: &mut [T], grads: &[T], lr: f64) {
        self.update(params, grads, lr, true);
    }

    fn update(&mut self, params: &mut [T], grads: &[T], lr: f64, skip_zero: bool) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let c1 = T::one() - b1;
        let c2 = T::one() - b2;
        let corr1 = T::of(1.0 / (1.0 - self.beta1.powi(self.t as i32)));
        let corr2 = T::of(1.0 / (1.0 - self.beta2.powi(self.t as i32)));
        let lr = T::of(lr);
        let eps = T::of(self.eps);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            if skip_zero && g == T::zero() {
                continue;
            }
            *m = b1 * *m + c1 * g;
            *v = b2 * *v + c2 * g * g;
            let m_hat = *m * corr1;
            let v_hat = *v * corr2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
