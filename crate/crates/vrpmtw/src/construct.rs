//! Greedy route construction: repeatedly extend the current route with the
//! nearest unrouted customer that can still be served within capacity, one of
//! its windows, and the depot horizon; open a fresh route when nothing fits.

use crate::model::{evaluate, Instance, ModelError, Solution, DEPOT};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("customer {0} cannot be served even on a dedicated route")]
    Unserviceable(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Whether appending `id` to a route currently at `from` (departure-ready at
/// `ready`, carrying `load`) keeps the route feasible. Returns the new
/// departure-ready time on success.
fn extension(
    instance: &Instance,
    from: u32,
    ready: f64,
    load: f64,
    id: u32,
) -> Result<Option<f64>, ModelError> {
    let c = instance.customer(id)?;
    if load + c.demand > instance.capacity {
        return Ok(None);
    }
    let arrival = ready + instance.dist(from, id);
    let Some(w) = c.windows.iter().find(|w| w.close >= arrival) else {
        return Ok(None);
    };
    let start = arrival.max(w.open);
    // Any continuation returns no earlier than the direct leg home.
    if start + c.service_time + instance.dist(id, DEPOT) > instance.horizon.close {
        return Ok(None);
    }
    Ok(Some(start + c.service_time))
}

/// Builds an initial feasible solution. Deterministic: candidates are ranked
/// by distance with ties broken by lowest id. Errors if some customer cannot
/// be served alone on an empty vehicle, since no solution exists then.
pub fn greedy_construct(instance: &Instance) -> Result<Solution, ConstructError> {
    let mut unrouted: Vec<u32> = instance.customers.iter().map(|c| c.id).collect();
    unrouted.sort_unstable();
    let mut routes: Vec<Vec<u32>> = Vec::new();
    let mut current: Vec<u32> = Vec::new();
    let mut from = DEPOT;
    let mut ready = instance.horizon.open;
    let mut load = 0.0;

    while !unrouted.is_empty() {
        let mut best: Option<(f64, u32, f64)> = None;
        for &id in &unrouted {
            if let Some(next_ready) = extension(instance, from, ready, load, id)? {
                let d = instance.dist(from, id);
                let better = match best {
                    None => true,
                    Some((bd, bid, _)) => d < bd || (d == bd && id < bid),
                };
                if better {
                    best = Some((d, id, next_ready));
                }
            }
        }
        match best {
            Some((_, id, next_ready)) => {
                current.push(id);
                unrouted.retain(|&u| u != id);
                load += instance.customer(id)?.demand;
                from = id;
                ready = next_ready;
            }
            None => {
                if current.is_empty() {
                    // Fresh vehicle, full capacity, horizon start: if nothing
                    // fits now, the remaining customers are unserviceable.
                    return Err(ConstructError::Unserviceable(unrouted[0]));
                }
                routes.push(std::mem::take(&mut current));
                from = DEPOT;
                ready = instance.horizon.open;
                load = 0.0;
            }
        }
    }
    if !current.is_empty() {
        routes.push(current);
    }
    let solution = Solution::new(routes);
    debug_assert!(evaluate(instance, &solution).map_or(false, |s| s.feasible));
    Ok(solution)
}
