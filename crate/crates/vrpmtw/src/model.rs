//! Core problem data: instances, solutions, schedule evaluation, route
//! metrics, and the window-slack fitness measure used to pick shaking
//! candidates.
//!
//! Time and distance share one unit: travel time between two nodes equals
//! their Euclidean distance. Every vehicle leaves the depot when the horizon
//! opens and must return before it closes. A customer is served inside
//! exactly one of its time windows; arriving early means waiting, arriving
//! after the last window closes makes the route infeasible.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Schema tag written into every instance and solution JSON file.
pub const SCHEMA_VERSION: &str = "vrpmtw-v1";

/// Node id of the depot in distance lookups. Customers use ids >= 1.
pub const DEPOT: u32 = 0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown customer id {0}")]
    UnknownCustomer(u32),
    #[error("customer id {0} appears more than once")]
    DuplicateCustomer(u32),
    #[error("customer id {0} is not covered by any route")]
    MissingCustomer(u32),
    #[error("customer {0} is not visited in this schedule")]
    NotVisited(u32),
    #[error("solution is infeasible; fitness is only defined on feasible schedules")]
    InfeasibleSolution,
    #[error("fitness undefined for customer {customer}: arrival {arrival} is after every window close")]
    UndefinedFitness { customer: u32, arrival: f64 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("unsupported schema version {found:?}, expected {expected:?}")]
    SchemaVersion { found: String, expected: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Closed interval [open, close] in which service may start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub open: f64,
    pub close: f64,
}

impl TimeWindow {
    pub fn new(open: f64, close: f64) -> Self {
        TimeWindow { open, close }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.open <= t && t <= self.close
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub demand: f64,
    pub service_time: f64,
    /// Disjoint windows sorted by opening time.
    pub windows: Vec<TimeWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub seed: u64,
    pub depot_x: f64,
    pub depot_y: f64,
    pub horizon: TimeWindow,
    pub capacity: f64,
    pub customers: Vec<Customer>,
}

impl Instance {
    pub fn n_customers(&self) -> usize {
        self.customers.len()
    }

    /// Looks up a customer by id. Generated instances store customer `i` at
    /// index `i - 1`, so the common case is O(1) with a linear fallback for
    /// hand-built instances.
    pub fn customer(&self, id: u32) -> Result<&Customer, ModelError> {
        if id >= 1 {
            if let Some(c) = self.customers.get(id as usize - 1) {
                if c.id == id {
                    return Ok(c);
                }
            }
        }
        self.customers
            .iter()
            .find(|c| c.id == id)
            .ok_or(ModelError::UnknownCustomer(id))
    }

    /// Coordinates of a node; id 0 is the depot.
    pub fn position(&self, node: u32) -> Result<(f64, f64), ModelError> {
        if node == DEPOT {
            Ok((self.depot_x, self.depot_y))
        } else {
            let c = self.customer(node)?;
            Ok((c.x, c.y))
        }
    }

    /// Euclidean distance between two nodes, which is also the travel time.
    pub fn dist(&self, a: u32, b: u32) -> f64 {
        let (ax, ay) = self.position(a).expect("valid node id");
        let (bx, by) = self.position(b).expect("valid node id");
        (ax - bx).hypot(ay - by)
    }

    /// Structural sanity checks: unique positive ids, windows sorted, disjoint
    /// and inside the horizon, demands within (0, capacity].
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::InvalidInstance(msg));
        if self.horizon.open >= self.horizon.close {
            return err(format!(
                "horizon [{}, {}] is empty",
                self.horizon.open, self.horizon.close
            ));
        }
        if !(self.capacity > 0.0) {
            return err(format!("capacity {} must be positive", self.capacity));
        }
        let mut seen = HashSet::new();
        for c in &self.customers {
            if c.id == DEPOT {
                return err("customer id 0 is reserved for the depot".into());
            }
            if !seen.insert(c.id) {
                return Err(ModelError::DuplicateCustomer(c.id));
            }
            if !(c.demand >= 1.0 && c.demand <= self.capacity) {
                return err(format!(
                    "customer {} demand {} outside [1, capacity]",
                    c.id, c.demand
                ));
            }
            if c.service_time < 0.0 {
                return err(format!("customer {} has negative service time", c.id));
            }
            if c.windows.is_empty() {
                return err(format!("customer {} has no time windows", c.id));
            }
            let mut prev_close = f64::NEG_INFINITY;
            for w in &c.windows {
                if w.open >= w.close {
                    return err(format!(
                        "customer {} window [{}, {}] is empty",
                        c.id, w.open, w.close
                    ));
                }
                if w.open <= prev_close {
                    return err(format!(
                        "customer {} windows are not sorted and disjoint",
                        c.id
                    ));
                }
                if w.open < self.horizon.open || w.close > self.horizon.close {
                    return err(format!(
                        "customer {} window [{}, {}] leaves the horizon",
                        c.id, w.open, w.close
                    ));
                }
                prev_close = w.close;
            }
            for v in [c.x, c.y, c.demand, c.service_time] {
                if !v.is_finite() {
                    return err(format!("customer {} has a non-finite field", c.id));
                }
            }
        }
        Ok(())
    }
}

/// Ordered customer visits of one vehicle, depot endpoints implied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route {
    pub customers: Vec<u32>,
}

impl Route {
    pub fn new(customers: Vec<u32>) -> Self {
        Route { customers }
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub routes: Vec<Route>,
}

impl Solution {
    pub fn new(routes: Vec<Vec<u32>>) -> Self {
        Solution {
            routes: routes.into_iter().map(Route::new).collect(),
        }
    }

    pub fn customer_count(&self) -> usize {
        self.routes.iter().map(Route::len).sum()
    }

    /// Drops routes that visit no customers.
    pub fn prune_empty_routes(&mut self) {
        self.routes.retain(|r| !r.is_empty());
    }
}

/// Checks that the solution covers every customer of the instance exactly once
/// and references no unknown ids.
pub fn validate_solution(instance: &Instance, solution: &Solution) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for route in &solution.routes {
        for &id in &route.customers {
            instance.customer(id)?;
            if !seen.insert(id) {
                return Err(ModelError::DuplicateCustomer(id));
            }
        }
    }
    for c in &instance.customers {
        if !seen.contains(&c.id) {
            return Err(ModelError::MissingCustomer(c.id));
        }
    }
    Ok(())
}

/// One serviced customer in a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Stop {
    pub customer: u32,
    pub arrival: f64,
    /// Service start: max(arrival, window open) of the chosen window.
    pub start: f64,
    /// Index into the customer's window list of the window service uses.
    pub window_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteSchedule {
    pub stops: Vec<Stop>,
    pub load: f64,
    pub length: f64,
    /// Arrival time back at the depot.
    pub return_time: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub routes: Vec<RouteSchedule>,
    pub feasible: bool,
}

impl Schedule {
    /// Finds the stop that serves `customer`, if the schedule reached it.
    pub fn stop(&self, customer: u32) -> Option<&Stop> {
        self.routes
            .iter()
            .flat_map(|r| r.stops.iter())
            .find(|s| s.customer == customer)
    }
}

/// Propagates one route from the depot: each arrival picks the earliest
/// window whose close is not before the arrival, waits until it opens if
/// needed, then departs after service. The route is infeasible if any
/// customer's windows are all closed on arrival, the load exceeds capacity,
/// or the vehicle returns after the horizon closes. Propagation keeps going
/// past a missed window so the partial schedule is still inspectable.
pub fn evaluate_route(instance: &Instance, customers: &[u32]) -> Result<RouteSchedule, ModelError> {
    let mut stops = Vec::with_capacity(customers.len());
    let mut load = 0.0;
    let mut length = 0.0;
    let mut feasible = true;
    let mut prev = DEPOT;
    // Departure readiness: at the depot this is the horizon opening.
    let mut ready = instance.horizon.open;
    for &id in customers {
        let c = instance.customer(id)?;
        let leg = instance.dist(prev, id);
        length += leg;
        let arrival = ready + leg;
        load += c.demand;
        let chosen = c.windows.iter().position(|w| w.close >= arrival);
        match chosen {
            Some(wi) => {
                let start = arrival.max(c.windows[wi].open);
                stops.push(Stop {
                    customer: id,
                    arrival,
                    start,
                    window_index: wi,
                });
                ready = start + c.service_time;
            }
            None => {
                feasible = false;
                // Keep propagating with service at the arrival time so later
                // stops still get arrival estimates.
                stops.push(Stop {
                    customer: id,
                    arrival,
                    start: arrival,
                    window_index: c.windows.len().saturating_sub(1),
                });
                ready = arrival + c.service_time;
            }
        }
        prev = id;
    }
    let back = instance.dist(prev, DEPOT);
    length += back;
    let return_time = ready + back;
    if load > instance.capacity || return_time > instance.horizon.close {
        feasible = false;
    }
    if customers.is_empty() {
        // An unused vehicle never leaves the depot.
        return Ok(RouteSchedule {
            stops,
            load: 0.0,
            length: 0.0,
            return_time: instance.horizon.open,
            feasible: true,
        });
    }
    Ok(RouteSchedule {
        stops,
        load,
        length,
        return_time,
        feasible,
    })
}

/// Schedules every route of the solution. Unknown or duplicated customer ids
/// are structural errors; infeasibility is reported through the flags.
/// Partial coverage is allowed so intermediate solutions can be scored.
pub fn evaluate(instance: &Instance, solution: &Solution) -> Result<Schedule, ModelError> {
    let mut seen = HashSet::new();
    for route in &solution.routes {
        for &id in &route.customers {
            instance.customer(id)?;
            if !seen.insert(id) {
                return Err(ModelError::DuplicateCustomer(id));
            }
        }
    }
    let mut routes = Vec::with_capacity(solution.routes.len());
    let mut feasible = true;
    for route in &solution.routes {
        let rs = evaluate_route(instance, &route.customers)?;
        feasible &= rs.feasible;
        routes.push(rs);
    }
    Ok(Schedule { routes, feasible })
}

/// Total Euclidean length of one route including both depot legs.
pub fn route_length(instance: &Instance, customers: &[u32]) -> f64 {
    if customers.is_empty() {
        return 0.0;
    }
    let mut len = instance.dist(DEPOT, customers[0]);
    for pair in customers.windows(2) {
        len += instance.dist(pair[0], pair[1]);
    }
    len + instance.dist(customers[customers.len() - 1], DEPOT)
}

/// Sum of route lengths. Empty routes contribute nothing.
pub fn total_length(instance: &Instance, solution: &Solution) -> f64 {
    solution
        .routes
        .iter()
        .map(|r| route_length(instance, &r.customers))
        .sum()
}

/// Window slack of an arrival against a customer's window list.
///
/// Inside a window the fitness is the distance to the nearer boundary; before
/// all remaining windows it is the wait until the next opening; after every
/// close it is undefined. Low fitness marks customers that are expensive to
/// keep where they are, which is what shaking exploits.
pub fn fitness_value(windows: &[TimeWindow], arrival: f64) -> Result<f64, ModelError> {
    for w in windows {
        if w.contains(arrival) {
            return Ok((arrival - w.open).min(w.close - arrival));
        }
    }
    let mut best: Option<f64> = None;
    for w in windows {
        if w.open > arrival {
            let wait = w.open - arrival;
            best = Some(best.map_or(wait, |b: f64| b.min(wait)));
        }
    }
    best.ok_or(ModelError::UndefinedFitness {
        customer: DEPOT,
        arrival,
    })
}

/// Fitness of one scheduled customer. The customer must be visited on a
/// feasible route of the schedule.
pub fn fitness(instance: &Instance, schedule: &Schedule, customer: u32) -> Result<f64, ModelError> {
    let route = schedule
        .routes
        .iter()
        .find(|r| r.stops.iter().any(|s| s.customer == customer))
        .ok_or(ModelError::NotVisited(customer))?;
    if !route.feasible {
        return Err(ModelError::InfeasibleSolution);
    }
    let stop = route
        .stops
        .iter()
        .find(|s| s.customer == customer)
        .expect("stop located above");
    let c = instance.customer(customer)?;
    fitness_value(&c.windows, stop.arrival).map_err(|e| match e {
        ModelError::UndefinedFitness { arrival, .. } => ModelError::UndefinedFitness {
            customer,
            arrival,
        },
        other => other,
    })
}

/// Per-customer fitness of a fully feasible solution.
#[derive(Debug, Clone)]
pub struct FitnessTable {
    /// (customer id, fitness), sorted by id.
    pub entries: Vec<(u32, f64)>,
}

impl FitnessTable {
    pub fn get(&self, customer: u32) -> Option<f64> {
        self.entries
            .iter()
            .find(|(id, _)| *id == customer)
            .map(|(_, f)| *f)
    }

    /// Customer ids ordered by descending fitness, ties by lowest id.
    pub fn ranked_desc(&self) -> Vec<u32> {
        let mut order: Vec<(u32, f64)> = self.entries.clone();
        order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        order.into_iter().map(|(id, _)| id).collect()
    }
}

/// Computes the fitness of every visited customer. Errors if the solution is
/// infeasible, since arrivals past the last window close have no fitness.
pub fn fitness_table(instance: &Instance, solution: &Solution) -> Result<FitnessTable, ModelError> {
    let schedule = evaluate(instance, solution)?;
    if !schedule.feasible {
        return Err(ModelError::InfeasibleSolution);
    }
    let mut entries = Vec::with_capacity(solution.customer_count());
    for route in &schedule.routes {
        for stop in &route.stops {
            let c = instance.customer(stop.customer)?;
            let f = fitness_value(&c.windows, stop.arrival).map_err(|e| match e {
                ModelError::UndefinedFitness { arrival, .. } => ModelError::UndefinedFitness {
                    customer: stop.customer,
                    arrival,
                },
                other => other,
            })?;
            entries.push((stop.customer, f));
        }
    }
    entries.sort_by_key(|(id, _)| *id);
    Ok(FitnessTable { entries })
}

/// Aggregate quality numbers reported for a solved instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Total Euclidean tour length.
    pub length: f64,
    /// Sum of per-route depot return times.
    pub duration: f64,
    /// Number of non-empty routes.
    pub vehicles_used: usize,
    /// Wall-clock seconds spent producing the solution.
    pub solve_time: f64,
}

impl Metrics {
    pub fn compute(
        instance: &Instance,
        solution: &Solution,
        schedule: &Schedule,
        solve_time: f64,
    ) -> Metrics {
        let mut duration = 0.0;
        let mut vehicles = 0;
        for rs in &schedule.routes {
            if !rs.stops.is_empty() {
                duration += rs.return_time;
                vehicles += 1;
            }
        }
        Metrics {
            length: total_length(instance, solution),
            duration,
            vehicles_used: vehicles,
            solve_time,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    schema: String,
    #[serde(flatten)]
    instance: Instance,
}

#[derive(Serialize, Deserialize)]
struct SolutionFile {
    schema: String,
    routes: Vec<Route>,
}

pub fn instance_to_json(instance: &Instance) -> Result<String, ModelError> {
    let file = InstanceFile {
        schema: SCHEMA_VERSION.to_string(),
        instance: instance.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn instance_from_json(text: &str) -> Result<Instance, ModelError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.schema != SCHEMA_VERSION {
        return Err(ModelError::SchemaVersion {
            found: file.schema,
            expected: SCHEMA_VERSION.to_string(),
        });
    }
    file.instance.validate()?;
    Ok(file.instance)
}

pub fn save_instance(instance: &Instance, path: &Path) -> Result<(), ModelError> {
    fs::write(path, instance_to_json(instance)?)?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<Instance, ModelError> {
    instance_from_json(&fs::read_to_string(path)?)
}

pub fn solution_to_json(solution: &Solution) -> Result<String, ModelError> {
    let file = SolutionFile {
        schema: SCHEMA_VERSION.to_string(),
        routes: solution.routes.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn solution_from_json(text: &str) -> Result<Solution, ModelError> {
    let file: SolutionFile = serde_json::from_str(text)?;
    if file.schema != SCHEMA_VERSION {
        return Err(ModelError::SchemaVersion {
            found: file.schema,
            expected: SCHEMA_VERSION.to_string(),
        });
    }
    Ok(Solution { routes: file.routes })
}

pub fn save_solution(solution: &Solution, path: &Path) -> Result<(), ModelError> {
    fs::write(path, solution_to_json(solution)?)?;
    Ok(())
}

pub fn load_solution(path: &Path) -> Result<Solution, ModelError> {
    solution_from_json(&fs::read_to_string(path)?)
}
