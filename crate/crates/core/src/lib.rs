//! Modality-tailored age of information for multimodal edge sensing, with a
//! joint sampling-interval and offloading optimizer, a Monte-Carlo oracle for
//! the closed-form average, comparison baselines and an experiment harness.

pub mod baselines;
pub mod config;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod frames;
pub mod instance;
pub mod jso;
pub mod metric;
pub mod model;
pub mod oracle;
pub mod radio;

pub use baselines::{solve, Algorithm, SolveResult};
pub use error::{MaoiError, Result};
pub use instance::{CostReport, DeviceReport, Instance};
pub use jso::{solve_jso, Decision, SolveTrace};
pub use metric::{CostCurve, Objective};
pub use model::{CommitRule, StepRule, DeviceProfile, ModalityKind, ModalityWeights, SystemConfig};
pub use oracle::{simulate_avg_maoi, simulate_avg_maoi_device, TrajectoryStats};
pub use radio::OffloadVector;
