//! Scenario harness: declarative configs, batched rollouts, metrics and
//! plot-ready artifacts for fabric experiments.

pub mod config;
pub mod csvio;
pub mod metrics;
pub mod render;
pub mod runner;
pub mod system;
