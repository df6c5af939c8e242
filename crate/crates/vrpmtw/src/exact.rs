//! Exact solver for small instances: depth-first branch and bound over every
//! partition of the customers into ordered routes.
//!
//! Route-permutation symmetry is broken by an anchor rule: when a vehicle
//! leaves the depot, the lowest-id unserved customer becomes that route's
//! anchor, and the route may only close once it contains its anchor. Routes
//! are therefore generated in increasing order of their lowest customer id
//! while every within-route visit order stays reachable (visit order matters
//! under time windows, so no ordering inside a route may be forced away).
//! Pruning uses capacity, window and horizon feasibility plus a length bound
//! built from each unserved customer's cheapest incoming arc.

use crate::construct::greedy_construct;
use crate::model::{evaluate, Instance, Metrics, ModelError, Solution};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("instance has no feasible solution")]
    Infeasible,
    #[error("time limit reached before any feasible solution was found")]
    Unresolved,
    #[error("instance too large for the exact solver: {0} customers (limit {MAX_CUSTOMERS})")]
    TooLarge(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Hard size cap; the search tree is factorial in the customer count.
pub const MAX_CUSTOMERS: usize = 30;

#[derive(Debug, Clone, Copy)]
pub struct ExactConfig {
    pub time_limit: Option<Duration>,
    /// Disables the length lower bound when false; feasibility checks always
    /// apply. Exists so tests can compare against full enumeration.
    pub prune: bool,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            time_limit: None,
            prune: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactResult {
    pub solution: Solution,
    pub metrics: Metrics,
    /// False when the time limit cut the search short; the solution is then
    /// only the best one found.
    pub proven_optimal: bool,
}

struct Search<'a> {
    instance: &'a Instance,
    ids: Vec<u32>,
    dist: Vec<Vec<f64>>,
    demand: Vec<f64>,
    service: Vec<f64>,
    /// Cheapest incoming arc per customer, over all other nodes.
    min_in: Vec<f64>,
    config: ExactConfig,
    started: Instant,
    nodes: u64,
    timed_out: bool,
    best_len: f64,
    best: Option<Vec<Vec<usize>>>,
    done: Vec<Vec<usize>>,
    current: Vec<usize>,
    visited: u64,
    sum_min_in: f64,
}

impl<'a> Search<'a> {
    /// Node index: 0 is the depot, i >= 1 is ids[i - 1].
    fn node_id(&self, i: usize) -> u32 {
        if i == 0 {
            0
        } else {
            self.ids[i - 1]
        }
    }

    fn check_clock(&mut self) -> bool {
        self.nodes += 1;
        if self.timed_out {
            return true;
        }
        if let Some(limit) = self.config.time_limit {
            if self.nodes % 4096 == 1 && self.started.elapsed() >= limit {
                self.timed_out = true;
            }
        }
        self.timed_out
    }

    /// Lower bound on any completion: arcs already paid, one cheapest
    /// incoming arc per unserved customer, and one return leg from whichever
    /// node could end the open route.
    fn lower_bound(&self, arcs: f64, last: Option<usize>) -> f64 {
        let mut lb = arcs + self.sum_min_in;
        let mut ret = f64::INFINITY;
        if let Some(l) = last {
            ret = self.dist[l][0];
        }
        for i in 1..=self.ids.len() {
            if self.visited & (1 << i) == 0 {
                ret = ret.min(self.dist[i][0]);
            }
        }
        if ret.is_finite() {
            lb += ret;
        }
        lb
    }

    fn record_complete(&mut self, arcs: f64) {
        if arcs < self.best_len {
            self.best_len = arcs;
            let mut sol = self.done.clone();
            if !self.current.is_empty() {
                sol.push(self.current.clone());
            }
            self.best = Some(sol);
        }
    }

    /// `ready` is the departure-ready time at `last` (or the horizon open at
    /// the depot); `anchor` is the customer the open route still owes, if any.
    fn dfs(&mut self, last: usize, ready: f64, load: f64, arcs: f64, anchor: Option<usize>) {
        if self.check_clock() {
            return;
        }
        let n = self.ids.len();
        let all = ((1u64 << (n + 1)) - 2) & !1; // bits 1..=n
        let route_open = !self.current.is_empty();

        if route_open && anchor.is_none() {
            // Closing is allowed: the anchor has been served.
            let back = self.dist[last][0];
            let total = arcs + back;
            let horizon_ok = ready + back <= self.instance.horizon.close;
            if horizon_ok {
                if self.visited & all == all {
                    self.record_complete(total);
                } else if !self.config.prune || self.lower_bound(total, None) < self.best_len {
                    let closed = std::mem::take(&mut self.current);
                    self.done.push(closed);
                    self.dfs(0, self.instance.horizon.open, 0.0, total, None);
                    self.current = self.done.pop().expect("pushed above");
                }
            }
        }

        // Extend the route (opening it if the vehicle is still at the depot).
        let next_anchor = if route_open {
            anchor
        } else {
            (1..=n).find(|i| self.visited & (1 << i) == 0)
        };
        let mut candidates: Vec<(f64, usize)> = (1..=n)
            .filter(|i| self.visited & (1 << i) == 0)
            .map(|i| (self.dist[last][i], i))
            .collect();
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for (leg, c) in candidates {
            if load + self.demand[c - 1] > self.instance.capacity {
                continue;
            }
            let arrival = ready + leg;
            let cust = self
                .instance
                .customer(self.node_id(c))
                .expect("index maps to id");
            let Some(w) = cust.windows.iter().find(|w| w.close >= arrival) else {
                continue;
            };
            let start = arrival.max(w.open);
            // No continuation can return earlier than the direct leg home.
            if start + self.service[c - 1] + self.dist[c][0] > self.instance.horizon.close {
                continue;
            }
            let arcs2 = arcs + leg;
            self.visited |= 1 << c;
            self.sum_min_in -= self.min_in[c - 1];
            let prune = self.config.prune && self.lower_bound(arcs2, Some(c)) >= self.best_len;
            if !prune {
                self.current.push(c);
                let anchor2 = next_anchor.filter(|&a| a != c);
                self.dfs(
                    c,
                    start + self.service[c - 1],
                    load + self.demand[c - 1],
                    arcs2,
                    anchor2,
                );
                self.current.pop();
            }
            self.visited &= !(1 << c);
            self.sum_min_in += self.min_in[c - 1];
        }
    }
}

pub fn solve_exact_with(
    instance: &Instance,
    config: ExactConfig,
) -> Result<ExactResult, ExactError> {
    let started = Instant::now();
    instance.validate()?;
    let n = instance.n_customers();
    if n > MAX_CUSTOMERS {
        return Err(ExactError::TooLarge(n));
    }
    let mut ids: Vec<u32> = instance.customers.iter().map(|c| c.id).collect();
    ids.sort_unstable();
    let nodes: Vec<u32> = std::iter::once(0).chain(ids.iter().copied()).collect();
    let dist: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&a| nodes.iter().map(|&b| instance.dist(a, b)).collect())
        .collect();
    let min_in: Vec<f64> = (1..=n)
        .map(|j| {
            (0..=n)
                .filter(|&k| k != j)
                .map(|k| dist[k][j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let demand: Vec<f64> = ids
        .iter()
        .map(|&id| instance.customer(id).unwrap().demand)
        .collect();
    let service: Vec<f64> = ids
        .iter()
        .map(|&id| instance.customer(id).unwrap().service_time)
        .collect();

    // Warm-start the incumbent with the greedy heuristic when pruning; its
    // length is a valid upper bound and tightens the tree from the start.
    let mut best_len = f64::INFINITY;
    let mut seed_solution: Option<Solution> = None;
    if config.prune {
        if let Ok(sol) = greedy_construct(instance) {
            best_len = crate::model::total_length(instance, &sol);
            seed_solution = Some(sol);
        }
    }

    let sum_min_in = min_in.iter().sum();
    let mut search = Search {
        instance,
        ids,
        dist,
        demand,
        service,
        min_in,
        config,
        started,
        nodes: 0,
        timed_out: false,
        best_len,
        best: None,
        done: Vec::new(),
        current: Vec::new(),
        visited: 0,
        sum_min_in,
    };
    search.dfs(0, instance.horizon.open, 0.0, 0.0, None);

    let best = search.best.take();
    let solution = match best {
        Some(routes) => Solution::new(
            routes
                .iter()
                .map(|r| r.iter().map(|&i| search.node_id(i)).collect())
                .collect(),
        ),
        None => match seed_solution {
            Some(sol) => sol,
            None => {
                return Err(if search.timed_out {
                    ExactError::Unresolved
                } else {
                    ExactError::Infeasible
                });
            }
        },
    };
    let schedule = evaluate(instance, &solution)?;
    debug_assert!(schedule.feasible);
    let metrics = Metrics::compute(instance, &solution, &schedule, started.elapsed().as_secs_f64());
    Ok(ExactResult {
        solution,
        metrics,
        proven_optimal: !search.timed_out,
    })
}

/// Solves to proven optimality or until the time limit; see [`ExactConfig`].
pub fn solve_exact(
    instance: &Instance,
    time_limit: Option<Duration>,
) -> Result<ExactResult, ExactError> {
    solve_exact_with(
        instance,
        ExactConfig {
            time_limit,
            ..ExactConfig::default()
        },
    )
}
