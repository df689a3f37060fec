//! Scenario generation, parameter sweeps, trend checks and convergence grids.

pub mod convergence;
pub mod scenario;
pub mod sweep;
pub mod trends;

pub use convergence::{emit_convergence_grid, ConvergenceGrid};
pub use scenario::{generate_scenario, Scenario, ScenarioSettings};
pub use sweep::{run_sweep, IncrementRow, Metric, SweepParameter, SweepRow, SweepSpec, SweepTable};
pub use trends::{assert_trends, default_checks, CheckOutcome, Direction, TrendCheck, TrendReport};
