//! State encoding for the learned operator policy: one feature row per
//! customer plus a small vector describing how the search is going.

use super::kernel::Mat;
use super::net::{GLOBAL_FEATURES, NODE_FEATURES};
use crate::model::{evaluate, fitness_table, Instance, ModelError, Solution};

/// Coordinate scale of the generator's canvas; coordinates are divided by
/// this rather than a per-instance maximum so that the same depot/customer
/// layout always encodes identically.
pub const COORD_SCALE: f64 = 100.0;

/// Search-progress bookkeeping carried across policy steps. Ratios start at
/// 1 and `improved_last` starts true, matching a search that has just
/// accepted its starting solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchHistory {
    pub initial_length: f64,
    pub previous_length: f64,
    pub current_length: f64,
    pub best_length: f64,
    pub improved_last: bool,
    pub iteration: u64,
    pub max_iterations: u64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        1.0
    }
}

impl SearchHistory {
    pub fn start(initial_length: f64, max_iterations: u64) -> Self {
        SearchHistory {
            initial_length,
            previous_length: initial_length,
            current_length: initial_length,
            best_length: initial_length,
            improved_last: true,
            iteration: 0,
            max_iterations,
        }
    }

    /// Records the outcome of one operator application.
    pub fn update(&mut self, new_length: f64) {
        self.previous_length = self.current_length;
        self.current_length = new_length;
        self.improved_last = new_length < self.best_length;
        if self.improved_last {
            self.best_length = new_length;
        }
        self.iteration += 1;
    }

    pub fn globals(&self) -> [f64; GLOBAL_FEATURES] {
        let progress = if self.max_iterations > 0 {
            self.iteration as f64 / self.max_iterations as f64
        } else {
            0.0
        };
        [
            ratio(self.current_length, self.initial_length),
            ratio(self.best_length, self.initial_length),
            ratio(self.previous_length, self.current_length).clamp(0.0, 2.0),
            self.improved_last as u8 as f64,
            progress,
        ]
    }
}

/// Builds the per-node feature matrix for a complete feasible solution, one
/// row per customer in instance order:
/// coordinates (2), demand (1), up to three time windows as open/close/present
/// triples (9), scheduled arrival (1), predecessor and successor ids (2), and
/// the slack-based fitness value (1).
pub fn node_features(instance: &Instance, solution: &Solution) -> Result<Mat, ModelError> {
    let schedule = evaluate(instance, solution)?;
    let fitness = fitness_table(instance, solution)?;
    let span = instance.horizon.close - instance.horizon.open;
    let t_norm = |t: f64| (t - instance.horizon.open) / span;
    let n = instance.n_customers() as f64;

    // Route neighbours: id 0 stands for the depot on both ends.
    let mut pred = std::collections::HashMap::new();
    let mut succ = std::collections::HashMap::new();
    for route in &schedule.routes {
        let ids: Vec<u32> = route.stops.iter().map(|s| s.customer).collect();
        for (i, &c) in ids.iter().enumerate() {
            pred.insert(c, if i == 0 { 0 } else { ids[i - 1] });
            succ.insert(c, if i + 1 == ids.len() { 0 } else { ids[i + 1] });
        }
    }

    let mut x = Mat::zeros(instance.customers.len(), NODE_FEATURES);
    for (r, cust) in instance.customers.iter().enumerate() {
        let stop = schedule
            .stop(cust.id)
            .ok_or(ModelError::NotVisited(cust.id))?;
        let fit = fitness.get(cust.id).ok_or(ModelError::NotVisited(cust.id))?;
        let mut row = Vec::with_capacity(NODE_FEATURES);
        row.push(cust.x / COORD_SCALE);
        row.push(cust.y / COORD_SCALE);
        row.push(cust.demand / instance.capacity);
        for k in 0..3 {
            match cust.windows.get(k) {
                Some(w) => {
                    row.push(t_norm(w.open));
                    row.push(t_norm(w.close));
                    row.push(1.0);
                }
                None => {
                    row.push(0.0);
                    row.push(0.0);
                    row.push(0.0);
                }
            }
        }
        row.push(t_norm(stop.arrival));
        row.push(pred[&cust.id] as f64 / n);
        row.push(succ[&cust.id] as f64 / n);
        row.push(fit / span);
        debug_assert_eq!(row.len(), NODE_FEATURES);
        for (c, v) in row.into_iter().enumerate() {
            x.set(r, c, v);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::greedy_construct;
    use crate::gen::{generate, GenConfig, WindowMode};
    use crate::model::total_length;

    #[test]
    fn history_starts_neutral_and_tracks_updates() {
        let mut h = SearchHistory::start(200.0, 50);
        assert_eq!(h.globals(), [1.0, 1.0, 1.0, 1.0, 0.0]);
        h.update(150.0);
        let g = h.globals();
        assert!((g[0] - 0.75).abs() < 1e-12);
        assert!((g[1] - 0.75).abs() < 1e-12);
        assert!((g[2] - 200.0 / 150.0).abs() < 1e-12);
        assert_eq!(g[3], 1.0);
        assert!((g[4] - 0.02).abs() < 1e-12);
        h.update(180.0);
        let g = h.globals();
        assert!((g[0] - 0.9).abs() < 1e-12);
        assert!((g[1] - 0.75).abs() < 1e-12);
        assert_eq!(g[3], 0.0);
    }

    #[test]
    fn previous_to_current_ratio_is_clamped() {
        let mut h = SearchHistory::start(100.0, 10);
        h.update(10.0);
        assert_eq!(h.globals()[2], 2.0);
    }

    #[test]
    fn feature_rows_are_normalized_and_complete() {
        let inst = generate(&GenConfig::new(9, WindowMode::MixTw, 3)).unwrap();
        let sol = greedy_construct(&inst).unwrap();
        let x = node_features(&inst, &sol).unwrap();
        assert_eq!(x.rows, 9);
        assert_eq!(x.cols, NODE_FEATURES);
        for r in 0..x.rows {
            for c in 0..x.cols {
                let v = x.get(r, c);
                assert!(v.is_finite());
                assert!((-0.1..=2.0).contains(&v), "feature ({r},{c}) = {v}");
            }
        }
        // Window presence flags match the instance's window counts.
        for (r, cust) in inst.customers.iter().enumerate() {
            for k in 0..3 {
                let present = x.get(r, 5 + 3 * k);
                assert_eq!(present, (cust.windows.len() > k) as u8 as f64);
            }
        }
    }

    #[test]
    fn neighbour_ids_reflect_route_order() {
        let inst = generate(&GenConfig::new(6, WindowMode::OneTw, 8)).unwrap();
        let sol = greedy_construct(&inst).unwrap();
        let x = node_features(&inst, &sol).unwrap();
        let n = inst.n_customers() as f64;
        for route in &sol.routes {
            let ids = &route.customers;
            for (i, &c) in ids.iter().enumerate() {
                let r = inst.customers.iter().position(|cu| cu.id == c).unwrap();
                let want_pred = if i == 0 { 0 } else { ids[i - 1] } as f64 / n;
                let want_succ = if i + 1 == ids.len() { 0 } else { ids[i + 1] } as f64 / n;
                assert!((x.get(r, 13) - want_pred).abs() < 1e-12);
                assert!((x.get(r, 14) - want_succ).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn features_require_full_coverage() {
        let inst = generate(&GenConfig::new(4, WindowMode::OneTw, 1)).unwrap();
        let partial = Solution::new(vec![vec![1, 2]]);
        assert!(node_features(&inst, &partial).is_err());
        let sol = greedy_construct(&inst).unwrap();
        assert!((total_length(&inst, &sol) > 0.0));
        assert!(node_features(&inst, &sol).is_ok());
    }
}
