//! Batches of independent runs.
//!
//! Each run owns its scenario and random streams, so a batch parallelizes
//! without coordination. With the `parallel` feature (on by default) the
//! batch goes through rayon; without it, or through
//! [`map_runs_sequential`], it runs in order. Both produce identical
//! results in identical order.

use crate::engine::{run_comparison, run_scenario, Comparison, Report, SimError};
use crate::scenario::ScenarioConfig;

pub fn map_runs_sequential<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    F: Fn(&I) -> O,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_runs<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_runs<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    map_runs_sequential(items, f)
}

/// Runs `f` with at most `jobs` worker threads for any nested batch.
#[cfg(feature = "parallel")]
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<T: Send>(_jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    f()
}

/// The base scenario re-seeded once per entry of `seeds`.
pub fn seeded(base: &ScenarioConfig, seeds: &[u64]) -> Vec<ScenarioConfig> {
    seeds
        .iter()
        .map(|&seed| ScenarioConfig {
            seed,
            ..base.clone()
        })
        .collect()
}

pub fn run_sweep(configs: &[ScenarioConfig]) -> Vec<Result<Report, SimError>> {
    map_runs(configs, run_scenario)
}

pub fn run_sweep_sequential(configs: &[ScenarioConfig]) -> Vec<Result<Report, SimError>> {
    map_runs_sequential(configs, run_scenario)
}

pub fn compare_sweep(configs: &[ScenarioConfig]) -> Vec<Result<Comparison, SimError>> {
    map_runs(configs, run_comparison)
}
