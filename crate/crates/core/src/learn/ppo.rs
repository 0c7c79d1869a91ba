use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::PolicyParameters;
use super::train::TrainConfig;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// One controller decision as collected during an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Raw (unclipped) action.
    pub action: Vec<f64>,
    pub log_prob: f64,
    /// Reward accumulated until the next decision.
    pub reward: f64,
    pub value: f64,
    /// Last decision of its episode.
    pub done: bool,
}

/// A transition ready for optimisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob_old: f64,
    pub advantage: f64,
    pub value_target: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    /// Mean clipped surrogate objective (maximised).
    pub surrogate: f64,
    pub value_loss: f64,
    /// Sampled estimate of KL(old || new).
    pub kl: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

pub type EpochStats = LossParts;

fn batch_obs(samples: &[&Sample]) -> Array2<f64> {
    let cols = samples.first().map_or(0, |s| s.obs.len());
    Array2::from_shape_fn((samples.len(), cols), |(i, j)| samples[i].obs[j])
}

fn loss_impl(
    params: &PolicyParameters,
    samples: &[&Sample],
    cfg: &TrainConfig,
    want_grad: bool,
) -> Result<(LossParts, Option<Vec<f64>>)> {
    if samples.is_empty() {
        return Err(Error::Training("empty minibatch".into()));
    }
    let k = params.shape.actions;
    for s in samples {
        if s.action.len() != k {
            return Err(Error::Dimension { expected: k, actual: s.action.len() });
        }
    }
    let f = params.forward_batch(batch_obs(samples))?;
    let b = samples.len() as f64;
    let mut parts = LossParts::default();
    let mut d_head = Array2::<f64>::zeros((samples.len(), 2 * k));
    let mut d_value = Array1::<f64>::zeros(samples.len());

    for (i, s) in samples.iter().enumerate() {
        let head = f.head.row(i);
        let mut logp = 0.0;
        let mut entropy = 0.0;
        for j in 0..k {
            let (mu, ls) = (head[j], head[k + j]);
            let z = (s.action[j] - mu) / ls.exp();
            logp += -0.5 * z * z - ls - 0.5 * LN_2PI;
            entropy += ls + 0.5 * (1.0 + LN_2PI);
        }
        let ratio = (logp - s.log_prob_old).exp();
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let a = s.advantage;
        let unclipped_active = ratio * a <= clipped * a;
        parts.surrogate += (ratio * a).min(clipped * a);
        if (ratio - 1.0).abs() > cfg.clip {
            parts.clip_fraction += 1.0;
        }
        parts.kl += s.log_prob_old - logp;
        parts.entropy += entropy;
        let err = f.value[i] - s.value_target;
        parts.value_loss += err * err;

        if want_grad {
            let surrogate_term = if unclipped_active { -a * ratio } else { 0.0 };
            let d_logp = (surrogate_term - cfg.kl_coeff) / b;
            for j in 0..k {
                let (mu, ls) = (head[j], head[k + j]);
                let z = (s.action[j] - mu) / ls.exp();
                d_head[[i, j]] = d_logp * z / ls.exp();
                d_head[[i, k + j]] = d_logp * (z * z - 1.0) - cfg.entropy_coeff / b;
            }
            d_value[i] = cfg.vf_coeff * 2.0 * err / b;
        }
    }
    parts.surrogate /= b;
    parts.clip_fraction /= b;
    parts.kl /= b;
    parts.entropy /= b;
    parts.value_loss /= b;
    parts.total = -parts.surrogate + cfg.vf_coeff * parts.value_loss + cfg.kl_coeff * parts.kl
        - cfg.entropy_coeff * parts.entropy;
    let grad = want_grad.then(|| params.backward(&f, &d_head, &d_value));
    Ok((parts, grad))
}

/// Total loss `-surrogate + vf * value_loss + kl * kl - ent * entropy` of a
/// minibatch, with all terms averaged over it.
pub fn ppo_loss(params: &PolicyParameters, samples: &[&Sample], cfg: &TrainConfig) -> Result<LossParts> {
    Ok(loss_impl(params, samples, cfg, false)?.0)
}

/// [`ppo_loss`] and its gradient with respect to the flat weights.
pub fn ppo_loss_and_grad(
    params: &PolicyParameters,
    samples: &[&Sample],
    cfg: &TrainConfig,
) -> Result<(LossParts, Vec<f64>)> {
    let (parts, grad) = loss_impl(params, samples, cfg, true)?;
    Ok((parts, grad.expect("gradient requested")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n: usize) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn step(&mut self, weights: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((w, g), m), v) in weights.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Runs `sgd_iters` epochs of shuffled minibatch Adam steps over `samples`
/// and returns per-epoch minibatch-averaged diagnostics.
pub fn ppo_update<R: Rng>(
    params: &mut PolicyParameters,
    adam: &mut Adam,
    samples: &[Sample],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<EpochStats>> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.sgd_iters);
    for epoch in 0..cfg.sgd_iters {
        order.shuffle(rng);
        let mut acc = LossParts::default();
        let mut batches = 0.0;
        for chunk in order.chunks(cfg.minibatch_size.max(1)) {
            let mb: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (parts, grad) = ppo_loss_and_grad(params, &mb, cfg)?;
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!("non-finite loss in epoch {epoch}: {parts:?}")));
            }
            adam.step(&mut params.weights, &grad);
            acc.total += parts.total;
            acc.surrogate += parts.surrogate;
            acc.value_loss += parts.value_loss;
            acc.kl += parts.kl;
            acc.entropy += parts.entropy;
            acc.clip_fraction += parts.clip_fraction;
            batches += 1.0;
        }
        if batches > 0.0 {
            for x in [
                &mut acc.total,
                &mut acc.surrogate,
                &mut acc.value_loss,
                &mut acc.kl,
                &mut acc.entropy,
                &mut acc.clip_fraction,
            ] {
                *x /= batches;
            }
        }
        epochs.push(acc);
    }
    Ok(epochs)
}
