//! Benchmark helpers shared by the criterion targets.

use oba_core::sim::{RunConfig, RunReport};

/// Run one simulation and return its report, for use inside benchmark
/// bodies.
pub fn run(config: RunConfig) -> RunReport {
    oba_core::sim::run(config)
}
