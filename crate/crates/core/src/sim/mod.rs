//! Deterministic tabletop simulator.

pub mod arm;
pub mod proximity;
pub mod render;
pub mod runner;
pub mod scenario;
pub mod shape;
pub mod world;

pub use runner::{batch_csv, build_templates, run_batch, run_scenario, run_with_templates, success_rate, RunReport};
pub use scenario::Scenario;
