use crate::core::VIEW_COUNT;
use crate::numkit::{Activation, DenseCache, DenseLayer, Rng, Tensor2};

use super::{BanditError, Result};

const LN_2PI: f64 = 1.837877066409345;

/// Initial log standard deviation of the Gaussian policy.
pub const LOG_STD_INIT: f64 = -1.0;

/// Gaussian actor-critic over view weights: actor MLP
/// `5d -> 128 -> 128 -> 5` with tanh hidden layers and a sigmoid mean head,
/// state-independent learnable log-stds, and a critic MLP
/// `5d -> 128 -> 128 -> 1` with tanh hidden layers.
#[derive(Debug, Clone)]
pub struct FusionPolicy {
    pub l1: DenseLayer,
    pub l2: DenseLayer,
    pub mean: DenseLayer,
    pub log_std: Vec<f64>,
    pub c1: DenseLayer,
    pub c2: DenseLayer,
    pub value: DenseLayer,
}

pub struct ActorForward {
    pub c1: DenseCache,
    pub c2: DenseCache,
    pub mean: DenseCache,
}

pub struct CriticForward {
    pub c1: DenseCache,
    pub c2: DenseCache,
    pub v: DenseCache,
}

/// One sampled action: the raw Gaussian draw, the clipped weights actually
/// executed, and the pre-clip log-density.
#[derive(Debug, Clone)]
pub struct ActionSample {
    pub action: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_prob: f64,
}

/// Parameter gradients in `params_mut` order.
pub struct PolicyGrads {
    pub l1_w: Tensor2,
    pub l1_b: Vec<f64>,
    pub l2_w: Tensor2,
    pub l2_b: Vec<f64>,
    pub mean_w: Tensor2,
    pub mean_b: Vec<f64>,
    pub log_std: Vec<f64>,
    pub c1_w: Tensor2,
    pub c1_b: Vec<f64>,
    pub c2_w: Tensor2,
    pub c2_b: Vec<f64>,
    pub v_w: Tensor2,
    pub v_b: Vec<f64>,
}

impl FusionPolicy {
    pub fn init(state_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed).derive("policy-init");
        Self {
            l1: DenseLayer::glorot(state_dim, hidden, Activation::Tanh, &mut rng),
            l2: DenseLayer::glorot(hidden, hidden, Activation::Tanh, &mut rng),
            mean: DenseLayer::glorot(hidden, VIEW_COUNT, Activation::Sigmoid, &mut rng),
            log_std: vec![LOG_STD_INIT; VIEW_COUNT],
            c1: DenseLayer::glorot(state_dim, hidden, Activation::Tanh, &mut rng),
            c2: DenseLayer::glorot(hidden, hidden, Activation::Tanh, &mut rng),
            value: DenseLayer::glorot(hidden, 1, Activation::Identity, &mut rng),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.l1.in_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.l1.out_dim()
    }

    pub fn actor_forward(&self, state: &[f64]) -> Result<ActorForward> {
        let c1 = self.l1.forward(state)?;
        let c2 = self.l2.forward(&c1.out)?;
        let mean = self.mean.forward(&c2.out)?;
        Ok(ActorForward { c1, c2, mean })
    }

    /// Deterministic mean action, already inside `(0, 1)` via the sigmoid.
    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.actor_forward(state)?.mean.out)
    }

    pub fn critic_forward(&self, state: &[f64]) -> Result<CriticForward> {
        let c1 = self.c1.forward(state)?;
        let c2 = self.c2.forward(&c1.out)?;
        let v = self.value.forward(&c2.out)?;
        Ok(CriticForward { c1, c2, v })
    }

    pub fn state_value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.critic_forward(state)?.v.out[0])
    }

    /// Pre-clip Gaussian log-density of `action` under `mu` and the
    /// current log-stds.
    pub fn log_prob(&self, mu: &[f64], action: &[f64]) -> f64 {
        mu.iter()
            .zip(action)
            .zip(&self.log_std)
            .map(|((&m, &a), &ls)| {
                let sigma = ls.exp();
                let z = (a - m) / sigma;
                -0.5 * LN_2PI - ls - 0.5 * z * z
            })
            .sum()
    }

    /// Draw `a ~ Normal(mu(s), exp(log_std))` per coordinate and clip to
    /// `[0, 1]`; the log-density is taken before clipping.
    pub fn sample_action(&self, state: &[f64], rng: &mut Rng) -> Result<ActionSample> {
        let fwd = self.actor_forward(state)?;
        let mu = &fwd.mean.out;
        let action: Vec<f64> = mu
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &ls)| m + ls.exp() * rng.normal())
            .collect();
        let weights: Vec<f64> = action.iter().map(|a| a.clamp(0.0, 1.0)).collect();
        let log_prob = self.log_prob(mu, &action);
        Ok(ActionSample { action, weights, log_prob })
    }

    /// Accumulate actor and log-std gradients of `coeff * log_prob(a | s)`.
    pub fn logp_backward(
        &self,
        fwd: &ActorForward,
        action: &[f64],
        coeff: f64,
        grads: &mut PolicyGrads,
    ) -> Result<()> {
        let mu = &fwd.mean.out;
        let mut g_mu = vec![0.0; mu.len()];
        for i in 0..mu.len() {
            let sigma = self.log_std[i].exp();
            let z = (action[i] - mu[i]) / sigma;
            g_mu[i] = coeff * z / sigma;
            grads.log_std[i] += coeff * (z * z - 1.0);
        }
        let (g_w, g_b, g_h2) = self.mean.backward(&fwd.mean, &g_mu)?;
        add(&mut grads.mean_w, &g_w);
        add_vec(&mut grads.mean_b, &g_b);
        let (g_w, g_b, g_h1) = self.l2.backward(&fwd.c2, &g_h2)?;
        add(&mut grads.l2_w, &g_w);
        add_vec(&mut grads.l2_b, &g_b);
        let (g_w, g_b, _) = self.l1.backward(&fwd.c1, &g_h1)?;
        add(&mut grads.l1_w, &g_w);
        add_vec(&mut grads.l1_b, &g_b);
        Ok(())
    }

    /// Accumulate critic gradients of `coeff * V(s)`.
    pub fn value_backward(
        &self,
        fwd: &CriticForward,
        coeff: f64,
        grads: &mut PolicyGrads,
    ) -> Result<()> {
        let (g_w, g_b, g_h2) = self.value.backward(&fwd.v, &[coeff])?;
        add(&mut grads.v_w, &g_w);
        add_vec(&mut grads.v_b, &g_b);
        let (g_w, g_b, g_h1) = self.c2.backward(&fwd.c2, &g_h2)?;
        add(&mut grads.c2_w, &g_w);
        add_vec(&mut grads.c2_b, &g_b);
        let (g_w, g_b, _) = self.c1.backward(&fwd.c1, &g_h1)?;
        add(&mut grads.c1_w, &g_w);
        add_vec(&mut grads.c1_b, &g_b);
        Ok(())
    }

    /// Parameter order (also the checkpoint layout): actor l1, l2, mean
    /// (weight then bias each), log_std, critic c1, c2, value head.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.l1.params_mut();
        out.extend(self.l2.params_mut());
        out.extend(self.mean.params_mut());
        out.push(&mut self.log_std);
        out.extend(self.c1.params_mut());
        out.extend(self.c2.params_mut());
        out.extend(self.value.params_mut());
        out
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = self.l1.params();
        out.extend(self.l2.params());
        out.extend(self.mean.params());
        out.push(&self.log_std);
        out.extend(self.c1.params());
        out.extend(self.c2.params());
        out.extend(self.value.params());
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|s| s.len()).sum()
    }

    /// Gaussian entropy: `sum_i (0.5 + 0.5 ln(2 pi) + log_std_i)`.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| 0.5 + 0.5 * LN_2PI + ls).sum()
    }
}

impl PolicyGrads {
    pub fn zeros_like(p: &FusionPolicy) -> Self {
        let z = |l: &DenseLayer| (Tensor2::zeros(l.out_dim(), l.in_dim()), vec![0.0; l.out_dim()]);
        let (l1_w, l1_b) = z(&p.l1);
        let (l2_w, l2_b) = z(&p.l2);
        let (mean_w, mean_b) = z(&p.mean);
        let (c1_w, c1_b) = z(&p.c1);
        let (c2_w, c2_b) = z(&p.c2);
        let (v_w, v_b) = z(&p.value);
        Self {
            l1_w,
            l1_b,
            l2_w,
            l2_b,
            mean_w,
            mean_b,
            log_std: vec![0.0; p.log_std.len()],
            c1_w,
            c1_b,
            c2_w,
            c2_b,
            v_w,
            v_b,
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.l1_w.as_slice(),
            &self.l1_b,
            self.l2_w.as_slice(),
            &self.l2_b,
            self.mean_w.as_slice(),
            &self.mean_b,
            &self.log_std,
            self.c1_w.as_slice(),
            &self.c1_b,
            self.c2_w.as_slice(),
            &self.c2_b,
            self.v_w.as_slice(),
            &self.v_b,
        ]
    }
}

fn add(into: &mut Tensor2, from: &Tensor2) {
    for (a, b) in into.as_mut_slice().iter_mut().zip(from.as_slice()) {
        *a += b;
    }
}

fn add_vec(into: &mut [f64], from: &[f64]) {
    for (a, b) in into.iter_mut().zip(from) {
        *a += b;
    }
}

pub(super) fn check_finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(BanditError::Numeric(format!("non-finite {what}")))
    }
}
