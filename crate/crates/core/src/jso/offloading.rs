//! Interference-aware best-response offloading.
//!
//! A device's offloaded cost grows with the interference it sees, so it
//! prefers offloading exactly when that interference is below an
//! indifference level `Lambda_d`. With weights `w_d = P_d g_d` the game
//! admits the weighted potential
//!
//! `Phi(x) = 1/2 sum_{i != j} w_i w_j x_i x_j + sum_i w_i Lambda_i (1 - x_i)`
//!
//! whose change under a unilateral flip of `d` is `w_d (I_d - Lambda_d)`
//! with the sign of that device's own cost change.

use serde::Serialize;

use crate::instance::Instance;
use crate::metric::{growth_rate_expectation, Objective};
use crate::model::CommitRule;
use crate::radio::OffloadVector;

/// Relative margin a flip must beat to count as an improvement.
const IMPROVEMENT_RTOL: f64 = 1e-12;

/// Everything held fixed while offloading decisions move.
#[derive(Debug, Clone, Copy)]
pub struct OffloadingContext<'a> {
    pub instance: &'a Instance,
    pub tau: &'a [f64],
    pub mu: &'a [f64],
    pub objective: Objective,
}

impl<'a> OffloadingContext<'a> {
    pub fn new(instance: &'a Instance, tau: &'a [f64], mu: &'a [f64], objective: Objective) -> Self {
        Self {
            instance,
            tau,
            mu,
            objective,
        }
    }

    fn weights(&self, d: usize) -> [f64; 3] {
        let cfg = self.instance.config();
        let psi = self.objective.weights(self.instance.profile(d).maoi_weights.psi);
        std::array::from_fn(|s| growth_rate_expectation(psi[s], cfg.event_rates[s], self.tau[d]))
    }

    /// Own cost of `d` on one branch at a given interference.
    pub fn branch_cost(&self, d: usize, offloaded: bool, interference: f64) -> f64 {
        let state = self.instance.branch(d, offloaded, interference);
        self.instance
            .curve_for(d, &state, self.mu[d], self.objective)
            .value(self.tau[d])
    }

    pub fn device_cost(&self, d: usize, x: &OffloadVector) -> f64 {
        self.branch_cost(d, x.get(d), self.instance.interference(d, x))
    }

    pub fn system_cost(&self, x: &OffloadVector) -> f64 {
        self.instance.system_cost(self.tau, self.mu, x, self.objective)
    }

    /// Interference at which `d` is indifferent between the branches, or
    /// `-inf` when offloading never pays.
    pub fn indifference_interference(&self, d: usize) -> f64 {
        let inst = self.instance;
        let cfg = inst.config();
        let p = inst.profile(d);
        let st = inst.statics(d);
        let tau = self.tau[d];
        let mu = self.mu[d];
        let phi = self.weights(d);
        let phi_sum: f64 = phi.iter().sum();
        // offloaded cost = fixed + slope * S / rate
        let fixed: f64 = (0..3).map(|s| phi[s] * (0.5 * tau + st.edge_base[s])).sum::<f64>()
            + mu * (st.sensing_energy / tau - p.energy_budget);
        let slope = phi_sum + mu * p.tx_power / tau;
        let local = self.branch_cost(d, false, 0.0);
        if local <= fixed {
            return f64::NEG_INFINITY;
        }
        let rate = slope * st.payload_bits / (local - fixed);
        st.received_power / (rate / cfg.bandwidth * std::f64::consts::LN_2).exp_m1() - cfg.noise_power
    }

    /// The closed-form threshold exactly as printed, kept for comparison
    /// against the direct best response.
    pub fn printed_threshold(&self, d: usize) -> f64 {
        let inst = self.instance;
        let cfg = inst.config();
        let p = inst.profile(d);
        let st = inst.statics(d);
        let tau = self.tau[d];
        let mu = self.mu[d];
        let phi = self.weights(d);
        let phi_tau: f64 = phi.iter().sum::<f64>() * tau;
        let saving: f64 = (0..3).map(|s| phi[s] * tau * (st.local_sys[s] - st.edge_base[s])).sum();
        let exponent = (phi_tau + mu * p.tx_power) * st.payload_bits / (cfg.bandwidth * saving + mu * st.compute_energy);
        st.received_power / (exponent * std::f64::consts::LN_2).exp_m1() - cfg.noise_power
    }

    /// Weighted potential of the offloading game at `x`.
    pub fn potential(&self, x: &OffloadVector) -> f64 {
        let inst = self.instance;
        let n = inst.devices();
        let w: Vec<f64> = (0..n).map(|d| inst.statics(d).received_power).collect();
        let total_w: f64 = w.iter().sum();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let mut own = 0.0;
        for d in 0..n {
            if x.get(d) {
                sum += w[d];
                sum_sq += w[d] * w[d];
            } else {
                let lambda = self.indifference_interference(d);
                let lambda = if lambda.is_finite() { lambda } else { -total_w - 1.0 };
                own += w[d] * lambda;
            }
        }
        0.5 * (sum * sum - sum_sq) + own
    }
}

fn improves(candidate: f64, current: f64) -> bool {
    candidate < current - IMPROVEMENT_RTOL * current.abs().max(1.0)
}

/// Best response of `d` to the others in `x`; ties and capacity-blocked
/// switches keep the current choice.
pub fn best_response(ctx: &OffloadingContext<'_>, d: usize, x: &OffloadVector) -> bool {
    let current = x.get(d);
    if !current && !ctx.instance.capacity_admits(d, x) {
        return false;
    }
    let interference = ctx.instance.interference(d, x);
    let stay = ctx.branch_cost(d, current, interference);
    let flip = ctx.branch_cost(d, !current, interference);
    if improves(flip, stay) {
        !current
    } else {
        current
    }
}

/// What the printed threshold predicts for `d`, for cross-checking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdDiagnostic {
    pub device: usize,
    pub interference: f64,
    pub exact_threshold: f64,
    pub printed_threshold: f64,
    pub direct_prefers_offload: bool,
    pub printed_prefers_offload: bool,
}

pub fn threshold_diagnostics(ctx: &OffloadingContext<'_>, x: &OffloadVector) -> Vec<ThresholdDiagnostic> {
    (0..ctx.instance.devices())
        .map(|d| {
            let interference = ctx.instance.interference(d, x);
            let local = ctx.branch_cost(d, false, interference);
            let off = ctx.branch_cost(d, true, interference);
            let printed = ctx.printed_threshold(d);
            let diag = ThresholdDiagnostic {
                device: d,
                interference,
                exact_threshold: ctx.indifference_interference(d),
                printed_threshold: printed,
                direct_prefers_offload: off < local,
                printed_prefers_offload: interference <= printed,
            };
            if diag.direct_prefers_offload != diag.printed_prefers_offload {
                log::debug!(
                    "device {d}: printed threshold {printed:.3e} disagrees with direct comparison at interference {interference:.3e}"
                );
            }
            diag
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Commit {
    pub device: usize,
    pub offloaded: bool,
    /// `C(x) - C(x^(d))`.
    pub system_gain: f64,
    pub system_cost_after: f64,
    pub potential_before: f64,
    pub potential_after: f64,
}

/// One round: among devices whose best response differs from `x`, commit
/// the largest system-cost reduction (ties to the lowest index).
pub fn best_response_round(ctx: &OffloadingContext<'_>, x: &OffloadVector, rule: CommitRule) -> Option<Commit> {
    counted_round(ctx, x, rule).0
}

fn counted_round(ctx: &OffloadingContext<'_>, x: &OffloadVector, rule: CommitRule) -> (Option<Commit>, usize) {
    let n = ctx.instance.devices();
    let base = ctx.system_cost(x);
    let mut evals = 3 * n;
    let mut pick: Option<(usize, f64, f64)> = None;
    for d in 0..n {
        if best_response(ctx, d, x) == x.get(d) {
            continue;
        }
        let after = ctx.system_cost(&x.flipped(d));
        evals += n;
        let gain = base - after;
        if rule == CommitRule::SystemGain && gain <= 0.0 {
            continue;
        }
        if pick.map_or(true, |(_, g, _)| gain > g) {
            pick = Some((d, gain, after));
        }
    }
    let commit = pick.map(|(d, gain, after)| {
        let next = x.flipped(d);
        Commit {
            device: d,
            offloaded: next.get(d),
            system_gain: gain,
            system_cost_after: after,
            potential_before: ctx.potential(x),
            potential_after: ctx.potential(&next),
        }
    });
    (commit, evals)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffloadingOutcome {
    pub x: OffloadVector,
    pub commits: Vec<Commit>,
    /// False only if the round cap was hit.
    pub settled: bool,
    /// Device-cost evaluations performed.
    pub evaluations: usize,
}

impl OffloadingOutcome {
    pub fn rounds(&self) -> usize {
        self.commits.len()
    }
}

pub fn solve_offloading(ctx: &OffloadingContext<'_>, x_init: &OffloadVector, rule: CommitRule) -> OffloadingOutcome {
    let n = ctx.instance.devices();
    let cap = 100 + 10 * n * n;
    let mut x = x_init.clone();
    let mut commits = Vec::new();
    let mut evaluations = 0;
    while commits.len() < cap {
        let (commit, evals) = counted_round(ctx, &x, rule);
        evaluations += evals;
        match commit {
            Some(c) => {
                x.set(c.device, c.offloaded);
                commits.push(c);
            }
            None => {
                return OffloadingOutcome {
                    x,
                    commits,
                    settled: true,
                    evaluations,
                }
            }
        }
    }
    log::warn!("offloading rounds hit the cap of {cap}");
    OffloadingOutcome {
        x,
        commits,
        settled: false,
        evaluations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub x: OffloadVector,
    pub switches: usize,
    pub last_switch: Option<usize>,
    pub sweeps: usize,
    /// False only if the sweep cap was hit.
    pub settled: bool,
    pub evaluations: usize,
}

/// Index-order passes in which every device immediately adopts its own best
/// response, repeated until a full pass changes nothing.
pub fn selfish_sweeps(ctx: &OffloadingContext<'_>, x_init: &OffloadVector) -> SweepOutcome {
    let n = ctx.instance.devices();
    let mut out = SweepOutcome {
        x: x_init.clone(),
        switches: 0,
        last_switch: None,
        sweeps: 0,
        settled: false,
        evaluations: 0,
    };
    for _ in 0..100 + 10 * n {
        out.sweeps += 1;
        let mut changed = false;
        for d in 0..n {
            out.evaluations += 2;
            let br = best_response(ctx, d, &out.x);
            if br != out.x.get(d) {
                out.x.set(d, br);
                out.last_switch = Some(d);
                out.switches += 1;
                changed = true;
            }
        }
        if !changed {
            out.settled = true;
            return out;
        }
    }
    log::warn!("selfish sweeps hit the cap");
    out
}

/// Whether no admissible unilateral flip lowers that device's own cost.
pub fn is_nash(ctx: &OffloadingContext<'_>, x: &OffloadVector) -> bool {
    (0..ctx.instance.devices()).all(|d| best_response(ctx, d, x) == x.get(d))
}

/// Projected subgradient step on every multiplier.
pub fn update_multipliers(energy_rates: &[f64], budgets: &[f64], mu: &[f64], eta: f64) -> Vec<f64> {
    mu.iter()
        .zip(energy_rates.iter().zip(budgets))
        .map(|(&m, (&rate, &budget))| (m + eta * (rate - budget)).max(0.0))
        .collect()
}

/// Multiplier update with per-device step `eta * max(1, mu / budget)`.
pub fn update_multipliers_scaled(energy_rates: &[f64], budgets: &[f64], mu: &[f64], eta: f64) -> Vec<f64> {
    mu.iter()
        .zip(energy_rates.iter().zip(budgets))
        .map(|(&m, (&rate, &budget))| (m + eta * (m / budget).max(1.0) * (rate - budget)).max(0.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::penalized_cost;
    use crate::model::{total_data_bits, DeviceProfile, ModalityWeights, SystemConfig};
    use approx::assert_relative_eq;

    fn crowded(n: usize) -> Instance {
        let profiles = (0..n)
            .map(|d| DeviceProfile {
                id: d,
                channel_gain: 1e-3 * (1.0 + d as f64),
                maoi_weights: ModalityWeights::direct([1.0, 0.5 + 0.1 * d as f64, 1.0]),
                ..DeviceProfile::default()
            })
            .collect();
        Instance::new(profiles, SystemConfig::default()).unwrap()
    }

    #[test]
    fn multiplier_examples() {
        let out = update_multipliers(&[3.0], &[1.0], &[0.5], 0.01);
        assert_relative_eq!(out[0], 0.52, max_relative = 1e-14);
        assert_eq!(update_multipliers(&[0.0], &[1.0], &[0.005], 0.01), vec![0.0]);
        assert_eq!(update_multipliers(&[0.5], &[1.0], &[0.0], 0.01), vec![0.0]);
    }

    #[test]
    fn scaled_step_is_relative() {
        let out = update_multipliers_scaled(&[3.0, 6.0], &[1.0, 2.0], &[40.0, 80.0], 0.01);
        assert_relative_eq!(out[0], 40.8, max_relative = 1e-14);
        assert_relative_eq!(out[1], 81.6, max_relative = 1e-14);
        let low = update_multipliers_scaled(&[3.0], &[1.0], &[0.5], 0.01);
        assert_eq!(low, update_multipliers(&[3.0], &[1.0], &[0.5], 0.01));
        let slack = update_multipliers_scaled(&[0.0], &[1.0], &[5.0], 0.01);
        assert_relative_eq!(slack[0], 4.95, max_relative = 1e-14);
        assert_eq!(update_multipliers_scaled(&[0.0], &[16.0], &[0.1], 0.01), vec![0.0]);
    }

    #[test]
    fn single_device_offloads() {
        let inst = Instance::new(vec![DeviceProfile::default()], SystemConfig::default()).unwrap();
        let (tau, mu) = ([2.0], [1.0]);
        let ctx = OffloadingContext::new(&inst, &tau, &mu, Objective::Maoi);
        assert!(best_response(&ctx, 0, &OffloadVector::all_local(1)));
        let out = solve_offloading(&ctx, &OffloadVector::all_local(1), CommitRule::Equilibrium);
        assert_eq!(out.rounds(), 1);
        assert!(out.x.get(0));
    }

    #[test]
    fn capacity_blocks_offloading() {
        let config = SystemConfig {
            capacity_threshold: 0.5 * total_data_bits(&DeviceProfile::default()),
            ..SystemConfig::default()
        };
        let inst = Instance::new(vec![DeviceProfile::default()], config).unwrap();
        let (tau, mu) = ([2.0], [1.0]);
        let ctx = OffloadingContext::new(&inst, &tau, &mu, Objective::Maoi);
        assert!(!best_response(&ctx, 0, &OffloadVector::all_local(1)));
    }

    #[test]
    fn negative_threshold_predicts_local() {
        // a link whose SINR is 1 with a narrow band can never carry the payload in time
        let config = SystemConfig {
            bandwidth: 1e4,
            ..SystemConfig::default()
        };
        let weak = DeviceProfile {
            channel_gain: 1e-12,
            ..DeviceProfile::default()
        };
        let inst = Instance::new(vec![weak], config).unwrap();
        let (tau, mu) = ([2.0], [0.0]);
        let ctx = OffloadingContext::new(&inst, &tau, &mu, Objective::Maoi);
        assert!(ctx.indifference_interference(0) < 0.0);
        assert!(!best_response(&ctx, 0, &OffloadVector::all_local(1)));
    }

    #[test]
    fn exact_threshold_is_indifference_point() {
        let inst = crowded(4);
        let tau = [3.0, 4.0, 5.0, 6.0];
        let mu = [0.5, 1.0, 2.0, 0.1];
        let ctx = OffloadingContext::new(&inst, &tau, &mu, Objective::Maoi);
        for d in 0..4 {
            let lambda = ctx.indifference_interference(d);
            assert!(lambda.is_finite());
            let local = ctx.branch_cost(d, false, 0.0);
            let off = ctx.branch_cost(d, true, lambda);
            assert_relative_eq!(off, local, max_relative = 1e-9);
        }
    }

    #[test]
    fn potential_tracks_own_cost_changes() {
        let inst = crowded(6);
        let tau = [2.0, 3.0, 4.0, 2.5, 5.0, 7.0];
        let mu = [0.5, 1.0, 2.0, 0.1, 3.0, 0.7];
        let ctx = OffloadingContext::new(&inst, &tau, &mu, Objective::Maoi);
        let x = OffloadVector::from_bits(&[1, 0, 1, 1, 0, 0]);
        for d in 0..6 {
            let y = x.flipped(d);
            let own = ctx.device_cost(d, &y) - ctx.device_cost(d, &x);
            let pot = ctx.potential(&y) - ctx.potential(&x);
            assert_eq!(own.signum(), pot.signum(), "device {d}");
        }
        // the context agrees with the direct cost function
        let direct = penalized_cost(2, inst.profiles(), inst.config(), tau[2], mu[2], &x, Objective::Maoi);
        assert_relative_eq!(ctx.device_cost(2, &x), direct, max_relative = 1e-12);
    }

    #[test]
    fn round_picks_largest_gain_and_stops_at_equilibrium() {
        let inst = crowded(8);
        let tau = vec![2.0; 8];
        let mu = vec![1.0; 8];
        let ctx = OffloadingContext::new(&inst, &tau, &mu, Objective::Maoi);
        let x = OffloadVector::all_local(8);
        let c = best_response_round(&ctx, &x, CommitRule::Equilibrium).unwrap();
        let best_gain = (0..8)
            .filter(|&d| best_response(&ctx, d, &x))
            .map(|d| ctx.system_cost(&x) - ctx.system_cost(&x.flipped(d)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(c.system_gain, best_gain);
        let out = solve_offloading(&ctx, &x, CommitRule::Equilibrium);
        assert!(out.settled);
        assert!(is_nash(&ctx, &out.x));
        assert!(best_response_round(&ctx, &out.x, CommitRule::Equilibrium).is_none());
        for c in &out.commits {
            assert!(c.potential_after < c.potential_before);
        }
    }

    #[test]
    fn printed_threshold_is_finite() {
        let inst = crowded(3);
        let tau = [2.0; 3];
        let mu = [1.0; 3];
        let ctx = OffloadingContext::new(&inst, &tau, &mu, Objective::Maoi);
        let diags = threshold_diagnostics(&ctx, &OffloadVector::all_local(3));
        assert_eq!(diags.len(), 3);
        assert!(diags.iter().all(|d| !d.printed_threshold.is_nan()));
    }
}
