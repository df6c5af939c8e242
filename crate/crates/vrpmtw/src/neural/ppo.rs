//! Clipped-surrogate policy optimization over full rollout batches: shared
//! reward shaping, discounted returns, generalized advantage estimation, and
//! the combined policy/value update driven by one Adam optimizer.

use super::kernel::{AdamConfig, AdamState, Mat};
use super::net::{backward, forward, log_prob, ArchConfig, NetParams};
use super::NeuralError;
use serde::{Deserialize, Serialize};

/// Rewards are clamped to this band so one giant improvement cannot dominate
/// a whole rollout.
pub const REWARD_CLIP: f64 = 10.0;
/// Weight of the wall-clock term in the reward; seconds are expensive
/// relative to length units.
pub const TIME_PENALTY: f64 = 100.0;

/// Weight of the value regression term in the combined update loss.
pub const VALUE_COEF: f64 = 0.5;

/// Weight of the entropy bonus in the combined update loss. Single-episode
/// batches otherwise collapse the policy onto two or three operators within a
/// few hundred updates, which searches worse than the uniform start.
pub const ENTROPY_COEF: f64 = 0.01;

/// Per-step reward: length improvement minus the cost of the compute time the
/// step consumed, clamped to [-REWARD_CLIP, REWARD_CLIP].
pub fn reward(prev_length: f64, new_length: f64, step_seconds: f64) -> f64 {
    ((prev_length - new_length) - TIME_PENALTY * step_seconds).clamp(-REWARD_CLIP, REWARD_CLIP)
}

/// G_t = r_t + gamma * G_{t+1}, with nothing after the final step.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Generalized advantage estimation with a zero terminal bootstrap:
/// delta_t = r_t + gamma V_{t+1} - V_t and A_t = delta_t + gamma lambda A_{t+1}.
pub fn gae_advantages(rewards: &[f64], values: &[f64], gamma: f64, lam: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), values.len());
    let t_max = rewards.len();
    let mut out = vec![0.0; t_max];
    let mut acc = 0.0;
    for t in (0..t_max).rev() {
        let next_v = if t + 1 < t_max { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_v - values[t];
        acc = delta + gamma * lam * acc;
        out[t] = acc;
    }
    out
}

/// One term of the clipped surrogate:
/// min(ratio * adv, clamp(ratio, 1 - eps, 1 + eps) * adv).
pub fn clipped_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    (ratio * advantage).min(clipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    /// Full-batch passes (and Adam steps) per rollout.
    pub epochs: usize,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lam: 0.95,
            clip_eps: 0.2,
            epochs: 4,
            adam: AdamConfig::default(),
        }
    }
}

/// Advantages standardized to zero mean and unit variance over the batch.
/// Batches of one sample (or with no spread) are passed through unchanged;
/// there is no scale to remove.
fn normalized_advantages(batch: &[Sample]) -> Vec<f64> {
    let n = batch.len() as f64;
    let mean = batch.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = batch
        .iter()
        .map(|s| (s.advantage - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if batch.len() < 2 || std < 1e-8 {
        return batch.iter().map(|s| s.advantage).collect();
    }
    batch.iter().map(|s| (s.advantage - mean) / std).collect()
}

/// One decision point of a rollout, with everything the update needs.
#[derive(Debug, Clone)]
pub struct Sample {
    pub x: Mat,
    pub globals: Vec<f64>,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Stats from the final optimization epoch of one update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
}

/// Runs `epochs` full-batch passes minimizing
/// `-J + VALUE_COEF * value_loss - ENTROPY_COEF * entropy` with the shared
/// Adam state. Advantages are standardized over the batch so the policy step
/// size does not track the raw reward scale of the episode. Returns the final
/// epoch's diagnostics (value_loss is the raw MSE).
pub fn ppo_update(
    arch: &ArchConfig,
    params: &mut NetParams,
    adam: &mut AdamState,
    cfg: &PpoConfig,
    batch: &[Sample],
) -> Result<Diagnostics, NeuralError> {
    assert!(!batch.is_empty(), "empty rollout batch");
    let t_inv = 1.0 / batch.len() as f64;
    let advantages = normalized_advantages(batch);
    let mut diag = Diagnostics {
        mean_ratio: 0.0,
        clip_fraction: 0.0,
        policy_loss: 0.0,
        value_loss: 0.0,
    };
    for _ in 0..cfg.epochs {
        let mut grads = NetParams::zeros(arch);
        let mut objective = 0.0;
        let mut value_loss = 0.0;
        let mut entropy_sum = 0.0;
        let mut ratio_sum = 0.0;
        let mut clipped_n = 0usize;
        for (s, &adv) in batch.iter().zip(&advantages) {
            let fwd = forward(arch, params, &s.x, &s.globals);
            let logp = log_prob(&fwd.logits, s.action);
            let ratio = (logp - s.old_log_prob).exp();
            if !ratio.is_finite() {
                return Err(NeuralError::NonFinite(format!(
                    "probability ratio {ratio} (log prob {logp}, stored {})",
                    s.old_log_prob
                )));
            }
            ratio_sum += ratio;
            if (ratio - 1.0).abs() > cfg.clip_eps {
                clipped_n += 1;
            }
            let unclipped = ratio * adv;
            let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
            objective += unclipped.min(clipped) * t_inv;

            // Policy gradient flows only through the unclipped branch when it
            // is the active minimum; a binding clip has zero derivative.
            let mut dlogits = vec![0.0; arch.actions];
            if unclipped <= clipped {
                let coeff = -t_inv * adv * ratio;
                for (a, dl) in dlogits.iter_mut().enumerate() {
                    let indicator = (a == s.action) as u8 as f64;
                    *dl = coeff * (indicator - fwd.probs[a]);
                }
            }
            // d(-H)/dlogit_a = p_a (ln p_a + H); zero-probability actions
            // contribute nothing (p ln p -> 0).
            let mut entropy = 0.0;
            for &p in &fwd.probs {
                if p > 0.0 {
                    entropy -= p * p.ln();
                }
            }
            entropy_sum += entropy * t_inv;
            for (a, dl) in dlogits.iter_mut().enumerate() {
                let p = fwd.probs[a];
                if p > 0.0 {
                    *dl += ENTROPY_COEF * t_inv * p * (p.ln() + entropy);
                }
            }
            let vdiff = fwd.value - s.ret;
            value_loss += vdiff * vdiff * t_inv;
            let dvalue = VALUE_COEF * 2.0 * vdiff * t_inv;
            backward(arch, params, &fwd, &dlogits, dvalue, &mut grads);
        }
        let loss = -objective + VALUE_COEF * value_loss - ENTROPY_COEF * entropy_sum;
        if !loss.is_finite() {
            return Err(NeuralError::NonFinite(format!("loss {loss}")));
        }
        let grad_flat = grads.flatten();
        let mut flat = params.flatten();
        adam.step(&cfg.adam, &mut flat, &grad_flat);
        params.read_flat(&flat);
        diag = Diagnostics {
            mean_ratio: ratio_sum * t_inv,
            clip_fraction: clipped_n as f64 * t_inv,
            policy_loss: -objective,
            value_loss,
        };
    }
    Ok(diag)
}
