use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use super::{sigmoid, NumKitError, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub fn apply(&self, pre: &[f64]) -> Vec<f64> {
        match self {
            Activation::Identity => pre.to_vec(),
            Activation::Relu => pre.iter().map(|&x| x.max(0.0)).collect(),
            Activation::Tanh => pre.iter().map(|&x| x.tanh()).collect(),
            Activation::Sigmoid => pre.iter().map(|&x| sigmoid(x)).collect(),
            Activation::Softmax => softmax(pre),
        }
    }

    /// Pre-activation gradient: `J_act(pre)^T * upstream`.
    pub fn grad_pre(&self, pre: &[f64], out: &[f64], upstream: &[f64]) -> Vec<f64> {
        match self {
            Activation::Identity => upstream.to_vec(),
            Activation::Relu => pre
                .iter()
                .zip(upstream)
                .map(|(&p, &u)| if p > 0.0 { u } else { 0.0 })
                .collect(),
            Activation::Tanh => out
                .iter()
                .zip(upstream)
                .map(|(&o, &u)| u * (1.0 - o * o))
                .collect(),
            Activation::Sigmoid => out
                .iter()
                .zip(upstream)
                .map(|(&o, &u)| u * o * (1.0 - o))
                .collect(),
            Activation::Softmax => {
                // J = diag(s) - s s^T
                let s_dot_u: f64 = out.iter().zip(upstream).map(|(&s, &u)| s * u).sum();
                out.iter()
                    .zip(upstream)
                    .map(|(&s, &u)| s * (u - s_dot_u))
                    .collect()
            }
        }
    }
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Fully-connected layer `activation(W x + b)` with manual backprop.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weight: Tensor2, // out x in
    pub bias: Vec<f64>,  // out
    pub activation: Activation,
}

/// Cached values from a forward pass, needed for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub x: Vec<f64>,
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self { weight: Tensor2::zeros(out_dim, in_dim), bias: vec![0.0; out_dim], activation }
    }

    /// Glorot-uniform weight init, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut Rng) -> Self {
        let a = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data: Vec<f64> = (0..in_dim * out_dim).map(|_| rng.uniform_in(-a, a)).collect();
        Self {
            weight: Tensor2::from_vec_unchecked(out_dim, in_dim, data),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Square identity-initialized layer (used for projections that should
    /// start as a pass-through).
    pub fn identity_init(dim: usize, activation: Activation) -> Self {
        Self { weight: Tensor2::identity(dim), bias: vec![0.0; dim], activation }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<DenseCache> {
        if x.len() != self.in_dim() {
            return Err(NumKitError::Shape(format!(
                "dense forward: in_dim {} but input has length {}",
                self.in_dim(),
                x.len()
            )));
        }
        let mut pre = self.weight.matvec(x)?;
        for (p, b) in pre.iter_mut().zip(&self.bias) {
            *p += b;
        }
        let out = self.activation.apply(&pre);
        Ok(DenseCache { x: x.to_vec(), pre, out })
    }

    /// Gradients of a scalar loss w.r.t. weight, bias, and input, given the
    /// upstream gradient w.r.t. this layer's output.
    pub fn backward(
        &self,
        cache: &DenseCache,
        upstream: &[f64],
    ) -> Result<(Tensor2, Vec<f64>, Vec<f64>)> {
        if upstream.len() != self.out_dim() {
            return Err(NumKitError::Shape(format!(
                "dense backward: out_dim {} but upstream has length {}",
                self.out_dim(),
                upstream.len()
            )));
        }
        let g_pre = self.activation.grad_pre(&cache.pre, &cache.out, upstream);
        let mut g_w = Tensor2::zeros(self.out_dim(), self.in_dim());
        g_w.add_outer(1.0, &g_pre, &cache.x)?;
        let g_x = self.weight.matvec_t(&g_pre)?;
        Ok((g_w, g_pre, g_x))
    }

    /// Flat parameter views in documented order: weight row-major, then bias.
    pub fn params(&self) -> Vec<&[f64]> {
        vec![self.weight.as_slice(), &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }

    pub fn param_count(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }
}
