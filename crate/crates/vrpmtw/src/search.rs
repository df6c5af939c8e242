//! Metaheuristic drivers: variable neighborhood search (VNS) over the fixed
//! operator order, reduced VNS (RVNS) with uniform random operator choice,
//! and adaptive VNS (AVNS) with weight-ordered sweeps.
//!
//! One iteration is one operator application, shaking included. "Improvement"
//! everywhere means a new global best length; that one notion drives trace
//! flags, the stagnation counter that schedules shaking in RVNS and AVNS, and
//! the AVNS weight updates, so a recorded trace replays exactly. All drivers
//! are deterministic given (instance, start, seed).

use crate::model::{evaluate, total_length, Instance, ModelError, Solution};
use crate::operators::{
    local_search_counted, shake_counted, shake_random_removal, OperatorId, OperatorError,
    LOCAL_SEARCH_OPS,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;
use thiserror::Error;

/// Consecutive non-improving applications before RVNS and AVNS shake.
pub const STAGNATION_LIMIT: u32 = 10;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("starting solution is infeasible")]
    InfeasibleStart,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Operator applications allowed; 0 returns the start solution untouched.
    pub max_iterations: u64,
    pub seed: u64,
}

impl SearchBudget {
    pub fn new(max_iterations: u64, seed: u64) -> Self {
        SearchBudget {
            max_iterations,
            seed,
        }
    }
}

/// Which removal rule shaking uses. The random variant exists to measure the
/// value of fitness guidance; everything else about the shake is identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShakeMode {
    #[default]
    FitnessGuided,
    RandomRemoval,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchOptions {
    pub shake_mode: ShakeMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub elapsed_seconds: f64,
    pub operator: &'static str,
    pub current_length: f64,
    pub best_length: f64,
    /// True when this application produced a new global best.
    pub improved: bool,
    /// AVNS only: operator weights after this row's update, in
    /// [`LOCAL_SEARCH_OPS`] order.
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    /// Writes `iteration,elapsed_seconds,operator,current_length,best_length,
    /// improved,weights` rows; weights are `;`-joined and empty outside AVNS.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "iteration",
            "elapsed_seconds",
            "operator",
            "current_length",
            "best_length",
            "improved",
            "weights",
        ])?;
        for r in &self.rows {
            let weights = r
                .weights
                .as_ref()
                .map(|ws| {
                    ws.iter()
                        .map(|v| format!("{v}"))
                        .collect::<Vec<_>>()
                        .join(";")
                })
                .unwrap_or_default();
            out.write_record([
                r.iteration.to_string(),
                format!("{:.6}", r.elapsed_seconds),
                r.operator.to_string(),
                format!("{}", r.current_length),
                format!("{}", r.best_length),
                (r.improved as u8).to_string(),
                weights,
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// AVNS weight update: +5 on a new global best, otherwise -1 floored at 0.
pub fn weight_update(weight: f64, improved: bool) -> f64 {
    if improved {
        weight + 5.0
    } else {
        (weight - 1.0).max(0.0)
    }
}

/// Uniform operator draw used by RVNS, exposed so its distribution can be
/// tested directly.
pub fn uniform_op_sample<R: Rng>(rng: &mut R) -> OperatorId {
    LOCAL_SEARCH_OPS[rng.gen_range(0..LOCAL_SEARCH_OPS.len())]
}

/// Shared bookkeeping: working solution, global best, iteration budget and
/// the trace. Also used by the learned-policy driver in the neural module.
pub(crate) struct Run<'a> {
    pub(crate) instance: &'a Instance,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) shake_mode: ShakeMode,
    pub(crate) current: Solution,
    pub(crate) current_len: f64,
    pub(crate) best: Solution,
    pub(crate) best_len: f64,
    pub(crate) iterations: u64,
    pub(crate) max_iterations: u64,
    pub(crate) started: Instant,
    pub(crate) trace: Trace,
}

impl<'a> Run<'a> {
    pub(crate) fn start(
        instance: &'a Instance,
        x0: &Solution,
        budget: &SearchBudget,
        options: &SearchOptions,
    ) -> Result<Self, SearchError> {
        let schedule = evaluate(instance, x0)?;
        if !schedule.feasible {
            return Err(SearchError::InfeasibleStart);
        }
        let len = total_length(instance, x0);
        Ok(Run {
            instance,
            rng: ChaCha8Rng::seed_from_u64(budget.seed),
            shake_mode: options.shake_mode,
            current: x0.clone(),
            current_len: len,
            best: x0.clone(),
            best_len: len,
            iterations: 0,
            max_iterations: budget.max_iterations,
            started: Instant::now(),
            trace: Trace::default(),
        })
    }

    pub(crate) fn budget_left(&self) -> bool {
        self.iterations < self.max_iterations
    }

    fn record(&mut self, op: OperatorId, improved: bool, weights: Option<Vec<f64>>) {
        self.trace.rows.push(TraceRow {
            iteration: self.iterations,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
            operator: op.name(),
            current_length: self.current_len,
            best_length: self.best_len,
            improved,
            weights,
        });
    }

    /// Applies one operator to the working solution, updates the global best,
    /// and returns whether a new best was found.
    pub(crate) fn step(
        &mut self,
        op: OperatorId,
        weights: Option<&[f64; 12]>,
    ) -> Result<bool, SearchError> {
        let next = match op {
            OperatorId::Shake => match self.shake_mode {
                ShakeMode::FitnessGuided => {
                    shake_counted(self.instance, &self.current, &mut self.rng)?.0
                }
                ShakeMode::RandomRemoval => {
                    shake_random_removal(self.instance, &self.current, &mut self.rng)?
                }
            },
            _ => local_search_counted(self.instance, &self.current, op)?.0,
        };
        self.iterations += 1;
        self.current_len = total_length(self.instance, &next);
        self.current = next;
        let improved = self.current_len < self.best_len;
        if improved {
            self.best_len = self.current_len;
            self.best = self.current.clone();
        }
        self.record(op, improved, weights.map(|w| w.to_vec()));
        Ok(improved)
    }

    pub(crate) fn finish(self) -> (Solution, Trace) {
        (self.best, self.trace)
    }
}

/// Variable neighborhood search: cycle k over the fixed operator order; each
/// step shakes, then descends with operator k; a new best restarts at k = 1.
pub fn vns_with(
    instance: &Instance,
    x0: &Solution,
    budget: &SearchBudget,
    options: &SearchOptions,
) -> Result<(Solution, Trace), SearchError> {
    if budget.max_iterations == 0 {
        return Ok((x0.clone(), Trace::default()));
    }
    let mut run = Run::start(instance, x0, budget, options)?;
    'outer: loop {
        let mut k = 0;
        while k < LOCAL_SEARCH_OPS.len() {
            if !run.budget_left() {
                break 'outer;
            }
            // Shake perturbs a copy of the incumbent; the incumbent itself
            // only moves when the descended candidate beats it.
            let incumbent = run.current.clone();
            let incumbent_len = run.current_len;
            run.step(OperatorId::Shake, None)?;
            if !run.budget_left() {
                break 'outer;
            }
            run.step(LOCAL_SEARCH_OPS[k], None)?;
            if run.current_len < incumbent_len {
                k = 0;
            } else {
                run.current = incumbent;
                run.current_len = incumbent_len;
                k += 1;
            }
        }
    }
    Ok(run.finish())
}

pub fn vns(
    instance: &Instance,
    x0: &Solution,
    budget: &SearchBudget,
) -> Result<(Solution, Trace), SearchError> {
    vns_with(instance, x0, budget, &SearchOptions::default())
}

/// Reduced VNS: each iteration descends with a uniformly random operator;
/// after [`STAGNATION_LIMIT`] applications without a new best, shake once.
pub fn rvns_with(
    instance: &Instance,
    x0: &Solution,
    budget: &SearchBudget,
    options: &SearchOptions,
) -> Result<(Solution, Trace), SearchError> {
    if budget.max_iterations == 0 {
        return Ok((x0.clone(), Trace::default()));
    }
    let mut run = Run::start(instance, x0, budget, options)?;
    let mut stagnant = 0u32;
    while run.budget_left() {
        if stagnant >= STAGNATION_LIMIT {
            run.step(OperatorId::Shake, None)?;
            stagnant = 0;
            continue;
        }
        let op = uniform_op_sample(&mut run.rng);
        let improved = run.step(op, None)?;
        stagnant = if improved { 0 } else { stagnant + 1 };
    }
    Ok(run.finish())
}

pub fn rvns(
    instance: &Instance,
    x0: &Solution,
    budget: &SearchBudget,
) -> Result<(Solution, Trace), SearchError> {
    rvns_with(instance, x0, budget, &SearchOptions::default())
}

/// Adaptive VNS: sweeps run the operators in descending-weight order (ties by
/// catalog index, order re-sorted when a sweep starts); each application
/// updates its operator's weight via [`weight_update`]. Stagnation shaking
/// ends the current sweep.
pub fn avns_with(
    instance: &Instance,
    x0: &Solution,
    budget: &SearchBudget,
    options: &SearchOptions,
) -> Result<(Solution, Trace), SearchError> {
    if budget.max_iterations == 0 {
        return Ok((x0.clone(), Trace::default()));
    }
    let mut run = Run::start(instance, x0, budget, options)?;
    let mut weights = [1.0f64; 12];
    let mut stagnant = 0u32;
    'outer: while run.budget_left() {
        let mut order: Vec<usize> = (0..LOCAL_SEARCH_OPS.len()).collect();
        order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap().then(a.cmp(&b)));
        for k in order {
            if !run.budget_left() {
                break 'outer;
            }
            if stagnant >= STAGNATION_LIMIT {
                run.step(OperatorId::Shake, Some(&weights))?;
                stagnant = 0;
                continue 'outer;
            }
            let improved = run.step(LOCAL_SEARCH_OPS[k], None)?;
            weights[k] = weight_update(weights[k], improved);
            // Rewrite the row with the post-update snapshot.
            run.trace.rows.last_mut().expect("row just pushed").weights = Some(weights.to_vec());
            stagnant = if improved { 0 } else { stagnant + 1 };
        }
    }
    Ok(run.finish())
}

pub fn avns(
    instance: &Instance,
    x0: &Solution,
    budget: &SearchBudget,
) -> Result<(Solution, Trace), SearchError> {
    avns_with(instance, x0, budget, &SearchOptions::default())
}

/// Replays an AVNS weight trajectory from the trace's improvement flags.
/// Returns the weight vector after each local-search row, skipping shakes.
pub fn replay_avns_weights(trace: &Trace) -> Vec<Vec<f64>> {
    let mut weights = [1.0f64; 12];
    let mut out = Vec::new();
    for row in &trace.rows {
        if row.operator == OperatorId::Shake.name() {
            continue;
        }
        let k = LOCAL_SEARCH_OPS
            .iter()
            .position(|o| o.name() == row.operator)
            .expect("local-search operator name");
        weights[k] = weight_update(weights[k], row.improved);
        out.push(weights.to_vec());
    }
    out
}
