//! Neighborhood operators.
//!
//! Twelve local-search operators run best-improvement descent to a fixpoint:
//! every pass scans the operator's full neighborhood, applies the single move
//! with the largest strict length decrease, and repeats until nothing
//! improves. Feasibility of a candidate is decided by re-evaluating the
//! touched routes in full, never by incremental bookkeeping. Operator 0 is
//! fitness-guided shaking: remove the customers with the highest window
//! slack, then greedily reinsert them at the cheapest feasible positions.

use crate::model::{
    evaluate, evaluate_route, fitness_table, route_length, Instance, ModelError, Solution,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length decreases at or below this threshold do not count as improvements,
/// which keeps float noise from producing endless descent loops.
pub const MIN_IMPROVEMENT: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("input solution is infeasible")]
    InfeasibleInput,
    #[error("operator {0} is not a local-search operator")]
    NotLocalSearch(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The operator catalog. Indices are stable and double as the action space of
/// the learned selection policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorId {
    Shake,
    TwoOpt,
    Move1,
    TwoOptStar,
    Swap1,
    Swap2,
    Swap3,
    Swap12,
    Swap13,
    Swap23,
    Relocate1,
    Relocate2,
    Relocate3,
}

use OperatorId::*;

/// All operators in index order 0..=12.
pub const CATALOG: [OperatorId; 13] = [
    Shake, TwoOpt, Move1, TwoOptStar, Swap1, Swap2, Swap3, Swap12, Swap13, Swap23, Relocate1,
    Relocate2, Relocate3,
];

/// The twelve local-search operators, catalog order, shaking excluded.
pub const LOCAL_SEARCH_OPS: [OperatorId; 12] = [
    TwoOpt, Move1, TwoOptStar, Swap1, Swap2, Swap3, Swap12, Swap13, Swap23, Relocate1, Relocate2,
    Relocate3,
];

impl OperatorId {
    pub fn index(&self) -> usize {
        CATALOG.iter().position(|o| o == self).expect("in catalog")
    }

    pub fn from_index(index: usize) -> Option<OperatorId> {
        CATALOG.get(index).copied()
    }

    /// Stable name used in traces and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Shake => "shake",
            TwoOpt => "2opt",
            Move1 => "move1",
            TwoOptStar => "2opt-star",
            Swap1 => "swap1",
            Swap2 => "swap2",
            Swap3 => "swap3",
            Swap12 => "swap1-2",
            Swap13 => "swap1-3",
            Swap23 => "swap2-3",
            Relocate1 => "relocate1",
            Relocate2 => "relocate2",
            Relocate3 => "relocate3",
        }
    }

    pub fn parse(s: &str) -> Option<OperatorId> {
        CATALOG.into_iter().find(|o| o.name() == s)
    }
}

/// A scored move: the routes it rewrites and the total length change.
struct Cand {
    delta: f64,
    /// (route index, new visit order, new length)
    targets: Vec<(usize, Vec<u32>, f64)>,
}

/// Best-improvement scan state for one pass over a neighborhood.
struct Scan<'a> {
    instance: &'a Instance,
    routes: &'a [Vec<u32>],
    lens: &'a [f64],
    evals: u64,
    best: Option<Cand>,
}

impl<'a> Scan<'a> {
    fn new(instance: &'a Instance, routes: &'a [Vec<u32>], lens: &'a [f64]) -> Self {
        Scan {
            instance,
            routes,
            lens,
            evals: 0,
            best: None,
        }
    }

    /// Scores one candidate move given the routes it would rewrite. Keeps the
    /// first-found move among equal best deltas, so scan order is part of the
    /// determinism contract.
    fn consider(&mut self, touched: Vec<(usize, Vec<u32>)>) {
        self.evals += 1;
        let mut delta = 0.0;
        let mut targets = Vec::with_capacity(touched.len());
        for (idx, customers) in touched {
            let rs = evaluate_route(self.instance, &customers).expect("ids already validated");
            if !rs.feasible {
                return;
            }
            delta += rs.length - self.lens[idx];
            targets.push((idx, customers, rs.length));
        }
        if delta < -MIN_IMPROVEMENT && self.best.as_ref().map_or(true, |b| delta < b.delta) {
            self.best = Some(Cand { delta, targets });
        }
    }
}

fn reversed(route: &[u32], i: usize, j: usize) -> Vec<u32> {
    let mut out = route.to_vec();
    out[i..=j].reverse();
    out
}

fn reinserted(route: &[u32], from: usize, to: usize) -> Vec<u32> {
    let mut out = route.to_vec();
    let c = out.remove(from);
    out.insert(to, c);
    out
}

fn tail_swap(a: &[u32], b: &[u32], i: usize, j: usize) -> (Vec<u32>, Vec<u32>) {
    let mut na = a[..i].to_vec();
    na.extend_from_slice(&b[j..]);
    let mut nb = b[..j].to_vec();
    nb.extend_from_slice(&a[i..]);
    (na, nb)
}

fn seg_swap(a: &[u32], b: &[u32], i: usize, la: usize, j: usize, lb: usize) -> (Vec<u32>, Vec<u32>) {
    let mut na = a[..i].to_vec();
    na.extend_from_slice(&b[j..j + lb]);
    na.extend_from_slice(&a[i + la..]);
    let mut nb = b[..j].to_vec();
    nb.extend_from_slice(&a[i..i + la]);
    nb.extend_from_slice(&b[j + lb..]);
    (na, nb)
}

fn seg_relocate(a: &[u32], b: &[u32], i: usize, len: usize, to: usize) -> (Vec<u32>, Vec<u32>) {
    let mut na = a[..i].to_vec();
    na.extend_from_slice(&a[i + len..]);
    let mut nb = b[..to].to_vec();
    nb.extend_from_slice(&a[i..i + len]);
    nb.extend_from_slice(&b[to..]);
    (na, nb)
}

/// Intra-route segment reversal between two cut edges.
fn scan_two_opt(s: &mut Scan) {
    for (r, route) in s.routes.iter().enumerate() {
        for i in 0..route.len() {
            for j in i + 1..route.len() {
                s.consider(vec![(r, reversed(route, i, j))]);
            }
        }
    }
}

/// Intra-route reinsertion of a single customer.
fn scan_move1(s: &mut Scan) {
    for (r, route) in s.routes.iter().enumerate() {
        for from in 0..route.len() {
            for to in 0..route.len() {
                if to != from {
                    s.consider(vec![(r, reinserted(route, from, to))]);
                }
            }
        }
    }
}

/// Inter-route tail exchange at two cut points.
fn scan_two_opt_star(s: &mut Scan) {
    for a in 0..s.routes.len() {
        for b in a + 1..s.routes.len() {
            let (ra, rb) = (&s.routes[a], &s.routes[b]);
            for i in 0..=ra.len() {
                for j in 0..=rb.len() {
                    if i == ra.len() && j == rb.len() {
                        continue;
                    }
                    let (na, nb) = tail_swap(ra, rb, i, j);
                    s.consider(vec![(a, na), (b, nb)]);
                }
            }
        }
    }
}

/// Inter-route exchange of equal-length segments.
fn scan_swap_eq(s: &mut Scan, m: usize) {
    for a in 0..s.routes.len() {
        for b in a + 1..s.routes.len() {
            let (ra, rb) = (&s.routes[a], &s.routes[b]);
            if ra.len() < m || rb.len() < m {
                continue;
            }
            for i in 0..=ra.len() - m {
                for j in 0..=rb.len() - m {
                    let (na, nb) = seg_swap(ra, rb, i, m, j, m);
                    s.consider(vec![(a, na), (b, nb)]);
                }
            }
        }
    }
}

/// Inter-route exchange of segments of different lengths; ordered route pairs
/// cover both orientations.
fn scan_swap_uneq(s: &mut Scan, m: usize, n: usize) {
    for a in 0..s.routes.len() {
        for b in 0..s.routes.len() {
            if a == b {
                continue;
            }
            let (ra, rb) = (&s.routes[a], &s.routes[b]);
            if ra.len() < m || rb.len() < n {
                continue;
            }
            for i in 0..=ra.len() - m {
                for j in 0..=rb.len() - n {
                    let (na, nb) = seg_swap(ra, rb, i, m, j, n);
                    s.consider(vec![(a, na), (b, nb)]);
                }
            }
        }
    }
}

/// Relocation of a segment into a different route.
fn scan_relocate(s: &mut Scan, m: usize) {
    for a in 0..s.routes.len() {
        for b in 0..s.routes.len() {
            if a == b {
                continue;
            }
            let (ra, rb) = (&s.routes[a], &s.routes[b]);
            if ra.len() < m {
                continue;
            }
            for i in 0..=ra.len() - m {
                for to in 0..=rb.len() {
                    let (na, nb) = seg_relocate(ra, rb, i, m, to);
                    s.consider(vec![(a, na), (b, nb)]);
                }
            }
        }
    }
}

/// One best-improvement pass. Returns the chosen move, if any, and the number
/// of candidates evaluated.
fn best_move(
    instance: &Instance,
    op: OperatorId,
    routes: &[Vec<u32>],
    lens: &[f64],
) -> (Option<Cand>, u64) {
    let mut scan = Scan::new(instance, routes, lens);
    match op {
        Shake => unreachable!("shake is dispatched separately"),
        TwoOpt => scan_two_opt(&mut scan),
        Move1 => scan_move1(&mut scan),
        TwoOptStar => scan_two_opt_star(&mut scan),
        Swap1 => scan_swap_eq(&mut scan, 1),
        Swap2 => scan_swap_eq(&mut scan, 2),
        Swap3 => scan_swap_eq(&mut scan, 3),
        Swap12 => scan_swap_uneq(&mut scan, 1, 2),
        Swap13 => scan_swap_uneq(&mut scan, 1, 3),
        Swap23 => scan_swap_uneq(&mut scan, 2, 3),
        Relocate1 => scan_relocate(&mut scan, 1),
        Relocate2 => scan_relocate(&mut scan, 2),
        Relocate3 => scan_relocate(&mut scan, 3),
    }
    (scan.best, scan.evals)
}

/// Runs one operator's best-improvement descent to a fixpoint and also
/// reports how many candidate moves were evaluated.
pub fn local_search_counted(
    instance: &Instance,
    solution: &Solution,
    op: OperatorId,
) -> Result<(Solution, u64), OperatorError> {
    if op == Shake {
        return Err(OperatorError::NotLocalSearch(op.name()));
    }
    let schedule = evaluate(instance, solution)?;
    if !schedule.feasible {
        return Err(OperatorError::InfeasibleInput);
    }
    let mut routes: Vec<Vec<u32>> = solution
        .routes
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| r.customers.clone())
        .collect();
    let mut lens: Vec<f64> = routes.iter().map(|r| route_length(instance, r)).collect();
    let mut evals = 0;
    loop {
        let (best, n) = best_move(instance, op, &routes, &lens);
        evals += n;
        let Some(cand) = best else { break };
        for (idx, customers, len) in cand.targets {
            routes[idx] = customers;
            lens[idx] = len;
        }
        // Inter-route moves can drain a route; drop it with its length entry.
        let mut i = 0;
        while i < routes.len() {
            if routes[i].is_empty() {
                routes.remove(i);
                lens.remove(i);
            } else {
                i += 1;
            }
        }
    }
    Ok((Solution::new(routes), evals))
}

/// See [`local_search_counted`].
pub fn local_search(
    instance: &Instance,
    solution: &Solution,
    op: OperatorId,
) -> Result<Solution, OperatorError> {
    local_search_counted(instance, solution, op).map(|(s, _)| s)
}

/// Number of customers shaking removes: one fifth of the instance, rounded up.
pub fn removal_count(n_customers: usize) -> usize {
    (n_customers + 4) / 5
}

/// The customers fitness-guided shaking removes: highest fitness first, ties
/// broken by lowest id.
pub fn removal_set(instance: &Instance, solution: &Solution) -> Result<Vec<u32>, OperatorError> {
    let table = fitness_table(instance, solution)?;
    let k = removal_count(instance.n_customers());
    Ok(table.ranked_desc().into_iter().take(k).collect())
}

/// Reinserts `removed` (already ordered) one by one at the feasible position
/// with the smallest length increase across all routes, opening a new route
/// when no position fits. The rng only breaks exact cost ties.
fn reinsert_all<R: Rng>(
    instance: &Instance,
    routes: &mut Vec<Vec<u32>>,
    removed: &[u32],
    rng: &mut R,
    evals: &mut u64,
) {
    for &c in removed {
        let mut lens: Vec<f64> = routes.iter().map(|r| route_length(instance, r)).collect();
        let mut best_cost = f64::INFINITY;
        let mut ties: Vec<(usize, usize)> = Vec::new();
        for (ri, route) in routes.iter().enumerate() {
            for pos in 0..=route.len() {
                *evals += 1;
                let mut cand = route.clone();
                cand.insert(pos, c);
                let rs = evaluate_route(instance, &cand).expect("known ids");
                if !rs.feasible {
                    continue;
                }
                let cost = rs.length - lens[ri];
                if cost < best_cost {
                    best_cost = cost;
                    ties.clear();
                    ties.push((ri, pos));
                } else if cost == best_cost {
                    ties.push((ri, pos));
                }
            }
        }
        if ties.is_empty() {
            routes.push(vec![c]);
            lens.push(0.0);
        } else {
            let (ri, pos) = if ties.len() == 1 {
                ties[0]
            } else {
                ties[rng.gen_range(0..ties.len())]
            };
            routes[ri].insert(pos, c);
        }
    }
}

fn shake_with_removal<R: Rng>(
    instance: &Instance,
    solution: &Solution,
    removed: Vec<u32>,
    rng: &mut R,
) -> Result<(Solution, u64), OperatorError> {
    let mut routes: Vec<Vec<u32>> = solution
        .routes
        .iter()
        .map(|r| {
            r.customers
                .iter()
                .copied()
                .filter(|c| !removed.contains(c))
                .collect::<Vec<u32>>()
        })
        .filter(|r| !r.is_empty())
        .collect();
    let mut evals = 0;
    reinsert_all(instance, &mut routes, &removed, rng, &mut evals);
    let out = Solution::new(routes);
    debug_assert!(evaluate(instance, &out).map_or(false, |s| s.feasible));
    Ok((out, evals))
}

/// Fitness-guided shaking. Requires a feasible input covering every customer;
/// the output covers the same customers and is feasible again.
pub fn shake_counted<R: Rng>(
    instance: &Instance,
    solution: &Solution,
    rng: &mut R,
) -> Result<(Solution, u64), OperatorError> {
    let removed = removal_set(instance, solution)?;
    shake_with_removal(instance, solution, removed, rng)
}

/// See [`shake_counted`].
pub fn shake<R: Rng>(
    instance: &Instance,
    solution: &Solution,
    rng: &mut R,
) -> Result<Solution, OperatorError> {
    shake_counted(instance, solution, rng).map(|(s, _)| s)
}

/// Shaking with a uniformly random removal set instead of the fitness
/// ranking; the reinsertion rule is identical. Used to measure what the
/// fitness guidance contributes.
pub fn shake_random_removal<R: Rng>(
    instance: &Instance,
    solution: &Solution,
    rng: &mut R,
) -> Result<Solution, OperatorError> {
    let table = fitness_table(instance, solution)?;
    let mut ids: Vec<u32> = instance.customers.iter().map(|c| c.id).collect();
    ids.sort_unstable();
    let k = removal_count(instance.n_customers());
    let picks = rand::seq::index::sample(rng, ids.len(), k);
    let mut removed: Vec<u32> = picks.iter().map(|i| ids[i]).collect();
    // Reinsertion order stays fitness-descending so only selection differs.
    removed.sort_by(|a, b| {
        let fa = table.get(*a).unwrap();
        let fb = table.get(*b).unwrap();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(b))
    });
    shake_with_removal(instance, solution, removed, rng).map(|(s, _)| s)
}

/// Applies one catalog operator: shaking for index 0, best-improvement local
/// search otherwise. Returns the new solution and evaluated-move count.
pub fn apply_counted<R: Rng>(
    instance: &Instance,
    solution: &Solution,
    op: OperatorId,
    rng: &mut R,
) -> Result<(Solution, u64), OperatorError> {
    match op {
        Shake => shake_counted(instance, solution, rng),
        _ => local_search_counted(instance, solution, op),
    }
}
