//! Search driver that replaces hand-tuned operator schedules with the
//! trained policy: every iteration the network scores the current state and
//! one catalog action (shaking included) is sampled from its softmax. With
//! zero-initialized output layers this degenerates to uniform random
//! operator selection, which is the intended untrained baseline.

use super::features::{node_features, SearchHistory};
use super::net::{forward, sample_index, ArchConfig, NetParams};
use super::train::load_checkpoint;
use super::NeuralError;
use crate::model::{Instance, Solution};
use crate::operators::CATALOG;
use crate::search::{Run, SearchBudget, SearchOptions, Trace};
use std::path::Path;

/// Loads just what solving needs from a training checkpoint.
pub fn load_policy(path: &Path) -> Result<(ArchConfig, NetParams), NeuralError> {
    let state = load_checkpoint(path)?;
    Ok((state.arch, state.params))
}

pub fn rl_avns_with(
    instance: &Instance,
    x0: &Solution,
    budget: &SearchBudget,
    options: &SearchOptions,
    arch: &ArchConfig,
    params: &NetParams,
) -> Result<(Solution, Trace), NeuralError> {
    if budget.max_iterations == 0 {
        return Ok((x0.clone(), Trace::default()));
    }
    let mut run = Run::start(instance, x0, budget, options)?;
    let mut history = SearchHistory::start(run.current_len, budget.max_iterations);
    while run.budget_left() {
        let x = node_features(instance, &run.current)?;
        let globals = history.globals();
        let fwd = forward(arch, params, &x, &globals);
        let action = sample_index(&fwd.probs, &mut run.rng);
        run.step(CATALOG[action], None)?;
        // The weights column carries the action distribution that produced
        // this row, in catalog order.
        run.trace.rows.last_mut().expect("row just pushed").weights = Some(fwd.probs);
        history.update(run.current_len);
    }
    Ok(run.finish())
}

pub fn rl_avns(
    instance: &Instance,
    x0: &Solution,
    budget: &SearchBudget,
    arch: &ArchConfig,
    params: &NetParams,
) -> Result<(Solution, Trace), NeuralError> {
    rl_avns_with(instance, x0, budget, &SearchOptions::default(), arch, params)
}
