//! A validated set of devices plus cell configuration, with every
//! decision-independent quantity cached so cost evaluation inside the
//! optimizer loops is O(1) per device once the interference is known.

use serde::Serialize;

use crate::energy::{computation_energy, sensing_energy};
use crate::error::{MaoiError, Result};
use crate::jso::Decision;
use crate::metric::{avg_maoi_modality, CostCurve, Objective};
use crate::model::{
    compute_time, sensing_time, system_time, total_data_bits, DeviceProfile, Location, ModalityKind, SystemConfig,
};
use crate::radio::{rate_under_interference, received_power, OffloadVector};

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceStatics {
    pub payload_bits: f64,
    pub sensing_energy: f64,
    pub compute_energy: f64,
    /// Local system time per modality (sensing + waiting + compute).
    pub local_sys: [f64; 3],
    /// Edge system time per modality without the upload.
    pub edge_base: [f64; 3],
    pub received_power: f64,
}

impl DeviceStatics {
    fn new(profile: &DeviceProfile, config: &SystemConfig) -> Self {
        Self {
            payload_bits: total_data_bits(profile),
            sensing_energy: sensing_energy(profile),
            compute_energy: computation_energy(profile, config),
            local_sys: ModalityKind::ALL.map(|m| system_time(profile, config, m, false, 0.0)),
            edge_base: ModalityKind::ALL
                .map(|m| sensing_time(profile, m) + compute_time(profile, config, m, Location::Edge)),
            received_power: received_power(profile),
        }
    }
}

/// System times and per-update energy of one device on one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchState {
    pub t_sys: [f64; 3],
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Instance {
    profiles: Vec<DeviceProfile>,
    config: SystemConfig,
    statics: Vec<DeviceStatics>,
}

impl Instance {
    pub fn new(profiles: Vec<DeviceProfile>, config: SystemConfig) -> Result<Self> {
        if profiles.is_empty() {
            return Err(MaoiError::Precondition("at least one device is required".into()));
        }
        config.validate()?;
        for p in &profiles {
            p.validate()?;
        }
        let statics = profiles.iter().map(|p| DeviceStatics::new(p, &config)).collect();
        Ok(Self {
            profiles,
            config,
            statics,
        })
    }

    pub fn devices(&self) -> usize {
        self.profiles.len()
    }

    pub fn profiles(&self) -> &[DeviceProfile] {
        &self.profiles
    }

    pub fn profile(&self, d: usize) -> &DeviceProfile {
        &self.profiles[d]
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn statics(&self, d: usize) -> &DeviceStatics {
        &self.statics[d]
    }

    pub fn check_device(&self, d: usize) -> Result<()> {
        if d < self.devices() {
            Ok(())
        } else {
            Err(MaoiError::DeviceIndex {
                index: d,
                count: self.devices(),
            })
        }
    }

    /// Received power summed over every offloading device.
    pub fn offered_interference(&self, x: &OffloadVector) -> f64 {
        self.statics
            .iter()
            .zip(x.iter())
            .filter(|(_, off)| *off)
            .map(|(s, _)| s.received_power)
            .sum()
    }

    /// Interference seen by `d` (excludes its own signal).
    pub fn interference(&self, d: usize, x: &OffloadVector) -> f64 {
        self.statics
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != d && x.get(j))
            .map(|(_, s)| s.received_power)
            .sum()
    }

    pub fn rate(&self, d: usize, interference: f64) -> f64 {
        rate_under_interference(&self.profiles[d], &self.config, interference)
    }

    pub fn upload_time(&self, d: usize, interference: f64) -> f64 {
        self.statics[d].payload_bits / self.rate(d, interference)
    }

    /// State of device `d` when it offloads (`true`) or not, given the interference it would see.
    pub fn branch(&self, d: usize, offloaded: bool, interference: f64) -> BranchState {
        let s = &self.statics[d];
        if offloaded {
            let trans = self.upload_time(d, interference);
            BranchState {
                t_sys: s.edge_base.map(|t| t + trans),
                energy: s.sensing_energy + self.profiles[d].tx_power * trans,
            }
        } else {
            BranchState {
                t_sys: s.local_sys,
                energy: s.sensing_energy + s.compute_energy,
            }
        }
    }

    pub fn branch_under(&self, d: usize, x: &OffloadVector) -> BranchState {
        let interference = if x.get(d) { self.interference(d, x) } else { 0.0 };
        self.branch(d, x.get(d), interference)
    }

    pub fn curve_for(&self, d: usize, state: &BranchState, mu: f64, objective: Objective) -> CostCurve {
        CostCurve {
            psi: objective.weights(self.profiles[d].maoi_weights.psi),
            lambda: self.config.event_rates,
            t_sys: state.t_sys,
            mu,
            energy: state.energy,
            energy_budget: self.profiles[d].energy_budget,
        }
    }

    pub fn curve(&self, d: usize, x: &OffloadVector, mu: f64, objective: Objective) -> CostCurve {
        self.curve_for(d, &self.branch_under(d, x), mu, objective)
    }

    pub fn device_cost(&self, d: usize, tau: f64, mu: f64, x: &OffloadVector, objective: Objective) -> f64 {
        self.curve(d, x, mu, objective).value(tau)
    }

    /// Sum of penalized device costs, O(D).
    pub fn system_cost(&self, tau: &[f64], mu: &[f64], x: &OffloadVector, objective: Objective) -> f64 {
        let total = self.offered_interference(x);
        (0..self.devices())
            .map(|d| {
                let interference = if x.get(d) {
                    (total - self.statics[d].received_power).max(0.0)
                } else {
                    0.0
                };
                let state = self.branch(d, x.get(d), interference);
                self.curve_for(d, &state, mu[d], objective).value(tau[d])
            })
            .sum()
    }

    /// Edge payload if `x` were applied.
    pub fn payload_load(&self, x: &OffloadVector) -> f64 {
        self.statics
            .iter()
            .zip(x.iter())
            .filter(|(_, off)| *off)
            .map(|(s, _)| s.payload_bits)
            .fold(0.0, |acc, b| acc + b)
    }

    /// Whether switching `d` to offloading keeps the edge payload within capacity.
    pub fn capacity_admits(&self, d: usize, x: &OffloadVector) -> bool {
        let others: f64 = self
            .statics
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != d && x.get(j))
            .map(|(_, s)| s.payload_bits)
            .sum();
        others + self.statics[d].payload_bits <= self.config.capacity_threshold
    }

    /// Average power draw of every device under `x` and `tau`.
    pub fn energy_rates(&self, tau: &[f64], x: &OffloadVector) -> Vec<f64> {
        (0..self.devices())
            .map(|d| self.branch_under(d, x).energy / tau[d])
            .collect()
    }

    /// Largest `(E_d / tau_d - E_max) / E_max` over devices.
    pub fn max_relative_violation(&self, tau: &[f64], x: &OffloadVector) -> f64 {
        self.energy_rates(tau, x)
            .iter()
            .zip(&self.profiles)
            .map(|(rate, p)| (rate - p.energy_budget) / p.energy_budget)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn report(&self, decision: &Decision) -> CostReport {
        let d_count = self.devices();
        let mut devices = Vec::with_capacity(d_count);
        for d in 0..d_count {
            let state = self.branch_under(d, &decision.x);
            let tau = decision.tau[d];
            let psi = self.profiles[d].maoi_weights.psi;
            let maoi: [f64; 3] =
                std::array::from_fn(|s| avg_maoi_modality(psi[s], self.config.event_rates[s], tau, state.t_sys[s]));
            let aoi: [f64; 3] = std::array::from_fn(|s| 0.5 * tau + state.t_sys[s]);
            let energy_rate = state.energy / tau;
            let budget = self.profiles[d].energy_budget;
            devices.push(DeviceReport {
                device: d,
                offloaded: decision.x.get(d),
                tau,
                mu: decision.mu[d],
                t_sys: state.t_sys,
                maoi,
                aoi,
                energy: state.energy,
                energy_rate,
                energy_violation: energy_rate - budget,
                penalized_cost: self.curve_for(d, &state, decision.mu[d], Objective::Maoi).value(tau),
            });
        }
        let n = d_count as f64;
        let mean = |f: &dyn Fn(&DeviceReport) -> f64| devices.iter().map(f).sum::<f64>() / n;
        let modality_maoi = std::array::from_fn(|s| mean(&|r| r.maoi[s]));
        let modality_aoi = std::array::from_fn(|s| mean(&|r| r.aoi[s]));
        CostReport {
            avg_maoi: mean(&|r| r.maoi.iter().sum()),
            avg_aoi: mean(&|r| r.aoi.iter().sum()),
            modality_maoi,
            modality_aoi,
            max_relative_violation: self.max_relative_violation(&decision.tau, &decision.x),
            offloaded: decision.x.offloaded_count(),
            payload_load: self.payload_load(&decision.x),
            devices,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceReport {
    pub device: usize,
    pub offloaded: bool,
    pub tau: f64,
    pub mu: f64,
    pub t_sys: [f64; 3],
    pub maoi: [f64; 3],
    pub aoi: [f64; 3],
    /// Energy of one update.
    pub energy: f64,
    pub energy_rate: f64,
    pub energy_violation: f64,
    pub penalized_cost: f64,
}

/// Per-device and per-modality breakdown of a decision.
/// System averages are means over devices of the per-device sums over modalities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub avg_maoi: f64,
    pub avg_aoi: f64,
    pub modality_maoi: [f64; 3],
    pub modality_aoi: [f64; 3],
    pub max_relative_violation: f64,
    pub offloaded: usize,
    pub payload_load: f64,
    pub devices: Vec<DeviceReport>,
}
