//! Seeded instance generator.
//!
//! Coordinates are uniform on [0, 100]^2 (depot included), demands come from
//! a normal N(15, 10^2) truncated to [1, 42] by rejection, and time windows
//! are chosen from three canonical delivery periods mapped onto the planning
//! horizon [0, 1000]: morning 6:00-9:00 -> [250, 375], midday 11:00-14:00 ->
//! [458.33, 583.33], evening 17:00-20:00 -> [708.33, 833.33]. Each concern
//! (coordinates, demands, windows) draws from its own ChaCha8 stream of the
//! instance seed, so adding a concern never shifts another one's draws.

use crate::model::{Customer, Instance, TimeWindow};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// How many of the three canonical periods each customer receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowMode {
    /// One period, chosen uniformly.
    OneTw,
    /// Two periods, the pair chosen uniformly.
    TwoTw,
    /// All three periods.
    ThreeTw,
    /// Two or three periods with equal probability.
    MixTw,
}

impl WindowMode {
    pub const ALL: [WindowMode; 4] = [
        WindowMode::OneTw,
        WindowMode::TwoTw,
        WindowMode::ThreeTw,
        WindowMode::MixTw,
    ];

    /// Stable string used in file names and on the command line.
    pub fn tag(&self) -> &'static str {
        match self {
            WindowMode::OneTw => "1tw",
            WindowMode::TwoTw => "2tw",
            WindowMode::ThreeTw => "3tw",
            WindowMode::MixTw => "mix",
        }
    }

    pub fn parse(s: &str) -> Option<WindowMode> {
        WindowMode::ALL.into_iter().find(|m| m.tag() == s)
    }
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// The three canonical delivery periods on the [0, 1000] horizon, in order.
/// A clock time h maps to h / 24 * 1000.
pub fn canonical_periods() -> [TimeWindow; 3] {
    let map = |h: f64| h / 24.0 * 1000.0;
    [
        TimeWindow::new(map(6.0), map(9.0)),
        TimeWindow::new(map(11.0), map(14.0)),
        TimeWindow::new(map(17.0), map(20.0)),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_customers: usize,
    pub mode: WindowMode,
    pub seed: u64,
    pub capacity: f64,
    pub horizon: TimeWindow,
    pub coord_max: f64,
    pub service_time: f64,
    pub demand_mean: f64,
    pub demand_std: f64,
    pub demand_min: f64,
    pub demand_max: f64,
}

impl GenConfig {
    pub fn new(n_customers: usize, mode: WindowMode, seed: u64) -> Self {
        GenConfig {
            n_customers,
            mode,
            seed,
            capacity: 100.0,
            horizon: TimeWindow::new(0.0, 1000.0),
            coord_max: 100.0,
            service_time: 10.0,
            demand_mean: 15.0,
            demand_std: 10.0,
            demand_min: 1.0,
            demand_max: 42.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), GenError> {
        if self.n_customers < 1 {
            return Err(GenError::InvalidConfig("n_customers must be >= 1".into()));
        }
        if !(self.demand_min > 0.0 && self.demand_max <= self.capacity) {
            return Err(GenError::InvalidConfig(format!(
                "demand bounds [{}, {}] must lie in (0, capacity]",
                self.demand_min, self.demand_max
            )));
        }
        if self.demand_min >= self.demand_max {
            return Err(GenError::InvalidConfig("empty demand range".into()));
        }
        if !(self.demand_std > 0.0) {
            return Err(GenError::InvalidConfig("demand std must be positive".into()));
        }
        if self.horizon.open >= self.horizon.close {
            return Err(GenError::InvalidConfig("empty horizon".into()));
        }
        Ok(())
    }
}

/// RNG for one generator concern: an independent ChaCha8 stream of the seed.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws from N(mean, std^2) until the sample lands in [min, max].
fn truncated_normal(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> f64 {
    let dist = Normal::new(cfg.demand_mean, cfg.demand_std).expect("std validated positive");
    loop {
        let v = dist.sample(rng);
        if v >= cfg.demand_min && v <= cfg.demand_max {
            return v;
        }
    }
}

/// Picks this customer's windows from the canonical periods.
fn pick_windows(rng: &mut ChaCha8Rng, mode: WindowMode, periods: &[TimeWindow; 3]) -> Vec<TimeWindow> {
    let keep_pair = |skip: usize| -> Vec<TimeWindow> {
        (0..3).filter(|&i| i != skip).map(|i| periods[i]).collect()
    };
    match mode {
        WindowMode::OneTw => vec![periods[rng.gen_range(0..3)]],
        WindowMode::TwoTw => keep_pair(rng.gen_range(0..3)),
        WindowMode::ThreeTw => periods.to_vec(),
        WindowMode::MixTw => {
            if rng.gen_bool(0.5) {
                keep_pair(rng.gen_range(0..3))
            } else {
                periods.to_vec()
            }
        }
    }
}

/// Generates one instance. Deterministic: the same config always yields the
/// same instance, byte for byte.
pub fn generate(cfg: &GenConfig) -> Result<Instance, GenError> {
    cfg.validate()?;
    let mut coords = stream_rng(cfg.seed, 0);
    let mut demands = stream_rng(cfg.seed, 1);
    let mut windows = stream_rng(cfg.seed, 2);
    let periods = canonical_periods();

    let depot_x = coords.gen_range(0.0..cfg.coord_max);
    let depot_y = coords.gen_range(0.0..cfg.coord_max);
    let customers = (1..=cfg.n_customers as u32)
        .map(|id| {
            let x = coords.gen_range(0.0..cfg.coord_max);
            let y = coords.gen_range(0.0..cfg.coord_max);
            Customer {
                id,
                x,
                y,
                demand: truncated_normal(&mut demands, cfg),
                service_time: cfg.service_time,
                windows: pick_windows(&mut windows, cfg.mode, &periods),
            }
        })
        .collect();

    let instance = Instance {
        name: format!("{}-n{}-s{}", cfg.mode, cfg.n_customers, cfg.seed),
        seed: cfg.seed,
        depot_x,
        depot_y,
        horizon: cfg.horizon,
        capacity: cfg.capacity,
        customers,
    };
    debug_assert!(instance.validate().is_ok());
    Ok(instance)
}
