//! Fixtures shared by the solver benchmarks.

use maoi_core::experiments::{generate_scenario, ScenarioSettings};
use maoi_core::{Instance, SystemConfig};

/// Seeded scenario with default settings and `d` devices.
pub fn fixture(d: usize, seed: u64) -> Instance {
    generate_scenario(d, seed, &ScenarioSettings::default(), &SystemConfig::default())
        .and_then(|s| s.instance())
        .expect("default scenario is valid")
}
