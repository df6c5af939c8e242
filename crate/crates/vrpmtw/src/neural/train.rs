//! Training loop for the operator-selection policy. Each episode samples a
//! fresh instance from a seed derived from (run seed, episode index), rolls
//! the policy out for a fixed number of operator applications, and applies
//! one clipped-surrogate update.
//!
//! Rewards charge for compute through a virtual clock: every candidate move
//! an operator evaluates costs a fixed number of seconds. That keeps training
//! runs bit-reproducible across machines while still penalizing expensive
//! neighborhoods.

use super::features::{node_features, SearchHistory};
use super::kernel::AdamState;
use super::net::{forward, log_prob, sample_index, ArchConfig, NetParams};
use super::ppo::{discounted_returns, gae_advantages, ppo_update, reward, PpoConfig, Sample};
use super::NeuralError;
use crate::construct::greedy_construct;
use crate::gen::{generate, GenConfig, WindowMode};
use crate::model::{total_length, Instance};
use crate::operators::{local_search_counted, shake_counted, OperatorId, CATALOG};
use crate::seeds::child_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

pub const CHECKPOINT_SCHEMA: &str = "vrpmtw-checkpoint-v1";

/// Seconds charged per evaluated candidate move; roughly one route
/// re-evaluation on commodity hardware.
pub const DEFAULT_EVAL_SECONDS: f64 = 2e-6;

// Seed streams derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_INSTANCE: u64 = 1;
const STREAM_ACTIONS: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: u64,
    /// Operator applications per episode.
    pub steps_per_episode: u64,
    pub instance_size: usize,
    pub window_mode: WindowMode,
    pub seed: u64,
    pub ppo: PpoConfig,
    pub eval_seconds: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 200,
            steps_per_episode: 50,
            instance_size: 10,
            window_mode: WindowMode::ThreeTw,
            seed: 0,
            ppo: PpoConfig::default(),
            eval_seconds: DEFAULT_EVAL_SECONDS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRow {
    pub episode: u64,
    /// Mean episode return for this update's batch. Each update consumes one
    /// episode, so this is that episode's discounted return from its first
    /// step.
    pub mean_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
}

/// Everything needed to continue a run exactly where it stopped; this is the
/// checkpoint payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub arch: ArchConfig,
    pub params: NetParams,
    pub adam: AdamState,
    /// Next episode index to run.
    pub episode: u64,
    pub config: TrainConfig,
}

impl TrainState {
    pub fn new(config: TrainConfig) -> Result<Self, NeuralError> {
        TrainState::with_arch(ArchConfig::default(), config)
    }

    pub fn with_arch(arch: ArchConfig, config: TrainConfig) -> Result<Self, NeuralError> {
        arch.validate().map_err(NeuralError::Arch)?;
        let params = NetParams::init(&arch, child_seed(config.seed, STREAM_INIT));
        let adam = AdamState::new(params.param_count());
        Ok(TrainState {
            arch,
            params,
            adam,
            episode: 0,
            config,
        })
    }

    /// Runs `episodes` more episodes, invoking `on_row` after each one.
    pub fn run(
        &mut self,
        episodes: u64,
        mut on_row: impl FnMut(&EpisodeRow),
    ) -> Result<Vec<EpisodeRow>, NeuralError> {
        let mut rows = Vec::with_capacity(episodes as usize);
        for _ in 0..episodes {
            let ep = self.episode;
            let cfg = self.config;
            let instance_seed = child_seed(child_seed(cfg.seed, STREAM_INSTANCE), ep);
            let action_seed = child_seed(child_seed(cfg.seed, STREAM_ACTIONS), ep);
            let instance = generate(
                &GenConfig::new(cfg.instance_size, cfg.window_mode, instance_seed),
            )?;
            let (batch, mean_return) = rollout(
                &self.arch,
                &self.params,
                &instance,
                cfg.steps_per_episode,
                cfg.eval_seconds,
                &cfg.ppo,
                action_seed,
            )?;
            let diag = ppo_update(&self.arch, &mut self.params, &mut self.adam, &cfg.ppo, &batch)?;
            let row = EpisodeRow {
                episode: ep,
                mean_return,
                policy_loss: diag.policy_loss,
                value_loss: diag.value_loss,
                clip_fraction: diag.clip_fraction,
            };
            on_row(&row);
            rows.push(row);
            self.episode += 1;
        }
        Ok(rows)
    }
}

/// Plays `steps` policy actions on one instance and packages the decisions
/// with their advantages and returns. Also reports the episode return.
fn rollout(
    arch: &ArchConfig,
    params: &NetParams,
    instance: &Instance,
    steps: u64,
    eval_seconds: f64,
    ppo: &PpoConfig,
    action_seed: u64,
) -> Result<(Vec<Sample>, f64), NeuralError> {
    let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
    let mut current = greedy_construct(instance)?;
    let mut current_len = total_length(instance, &current);
    let mut history = SearchHistory::start(current_len, steps);
    let mut samples = Vec::with_capacity(steps as usize);
    let mut rewards = Vec::with_capacity(steps as usize);
    let mut values = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        let x = node_features(instance, &current)?;
        let globals = history.globals().to_vec();
        let fwd = forward(arch, params, &x, &globals);
        let action = sample_index(&fwd.probs, &mut rng);
        let (next, evals) = match CATALOG[action] {
            OperatorId::Shake => shake_counted(instance, &current, &mut rng)?,
            op => local_search_counted(instance, &current, op)?,
        };
        let next_len = total_length(instance, &next);
        rewards.push(reward(current_len, next_len, evals as f64 * eval_seconds));
        values.push(fwd.value);
        samples.push(Sample {
            x,
            globals,
            action,
            old_log_prob: log_prob(&fwd.logits, action),
            advantage: 0.0,
            ret: 0.0,
        });
        history.update(next_len);
        current = next;
        current_len = next_len;
    }
    let returns = discounted_returns(&rewards, ppo.gamma);
    let advantages = gae_advantages(&rewards, &values, ppo.gamma, ppo.lam);
    for ((s, g), a) in samples.iter_mut().zip(&returns).zip(&advantages) {
        s.ret = *g;
        s.advantage = *a;
    }
    Ok((samples, returns.first().copied().unwrap_or(0.0)))
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    schema: String,
    #[serde(flatten)]
    state: TrainState,
}

pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<(), NeuralError> {
    let file = CheckpointFile {
        schema: CHECKPOINT_SCHEMA.to_string(),
        state: state.clone(),
    };
    let json = serde_json::to_string(&file)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState, NeuralError> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.schema != CHECKPOINT_SCHEMA {
        return Err(NeuralError::Checkpoint(format!(
            "unsupported checkpoint schema {:?}, expected {CHECKPOINT_SCHEMA:?}",
            file.schema
        )));
    }
    let state = file.state;
    state.arch.validate().map_err(NeuralError::Arch)?;
    let expected = NetParams::init(&state.arch, 0).param_count();
    if state.params.param_count() != expected {
        return Err(NeuralError::Checkpoint(format!(
            "parameter count {} does not match the declared architecture ({expected})",
            state.params.param_count()
        )));
    }
    if state.adam.m.len() != expected {
        return Err(NeuralError::Checkpoint(
            "optimizer state does not match the parameter count".into(),
        ));
    }
    Ok(state)
}

/// Writes `episode,mean_return,policy_loss,value_loss,clip_fraction` rows.
pub fn write_train_log<W: Write>(rows: &[EpisodeRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "episode",
        "mean_return",
        "policy_loss",
        "value_loss",
        "clip_fraction",
    ])?;
    for r in rows {
        out.write_record([
            r.episode.to_string(),
            format!("{}", r.mean_return),
            format!("{}", r.policy_loss),
            format!("{}", r.value_loss),
            format!("{}", r.clip_fraction),
        ])?;
    }
    out.flush()?;
    Ok(())
}
