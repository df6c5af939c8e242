//! Solver toolkit for the vehicle routing problem with multiple time windows
//! (VRPMTW): instance generation, greedy construction, a catalog of local
//! search operators, VNS-family metaheuristics, a learned operator-selection
//! policy trained with PPO, and an exact branch-and-bound oracle for small
//! instances.

pub mod cli;
pub mod construct;
pub mod exact;
pub mod gen;
pub mod model;
pub mod neural;
pub mod operators;
pub mod search;
pub mod seeds;
pub mod stats;
