//! Joint sampling and offloading: alternate per-device interval solves,
//! best-response offloading and projected subgradient multiplier steps
//! until the penalized system cost settles inside the energy band.

pub mod offloading;
pub mod sampling;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{MaoiError, Result};
use crate::instance::Instance;
use crate::metric::Objective;
use crate::model::{CommitRule, StepRule};
use crate::radio::OffloadVector;

use offloading::{selfish_sweeps, solve_offloading, update_multipliers, update_multipliers_scaled, OffloadingContext};

/// Optimization state: sampling intervals, offloading profile, multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub tau: Vec<f64>,
    pub x: OffloadVector,
    pub mu: Vec<f64>,
}

impl Decision {
    /// Every device at the shortest interval, computing locally, with the configured multiplier.
    pub fn initial(instance: &Instance) -> Self {
        let n = instance.devices();
        let c = instance.config();
        Self {
            tau: vec![c.tau_min; n],
            x: OffloadVector::all_local(n),
            mu: vec![c.initial_multiplier; n],
        }
    }

    pub fn validate(&self, instance: &Instance) -> Result<()> {
        let n = instance.devices();
        for (index, got) in [self.tau.len(), self.x.len(), self.mu.len()].into_iter().enumerate() {
            if got != n {
                return Err(MaoiError::DimensionMismatch {
                    index,
                    expected: n,
                    got,
                });
            }
        }
        let tau_min = instance.config().tau_min;
        if let Some(t) = self.tau.iter().find(|&&t| !(t >= tau_min) || !t.is_finite()) {
            return Err(MaoiError::Precondition(format!("sampling interval {t} below tau_min {tau_min}")));
        }
        if let Some(m) = self.mu.iter().find(|&&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(MaoiError::Precondition(format!("multiplier {m} is not a finite non-negative value")));
        }
        Ok(())
    }
}

/// How each outer iteration chooses the sampling intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalRule {
    /// Cost-minimizing interval per device.
    Optimal,
    /// Shortest interval meeting the energy budget under the current branch.
    MinimumFeasible,
}

/// How each outer iteration updates the offloading profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffloadPolicy {
    /// Best-response rounds until no device deviates.
    BestResponse(CommitRule),
    AllLocal,
    /// One permanent offload per iteration, chosen by largest system-cost drop.
    Greedy,
    /// Each device decides alone against an assumed fraction of the other devices' received power.
    Isolated { prior: f64 },
    /// Index-order sweeps, each device switching whenever its own cost drops.
    Selfish,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSpec {
    pub interval: IntervalRule,
    pub policy: OffloadPolicy,
    pub objective: Objective,
}

/// Work done in one outer iteration, for complexity measurements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    /// Newton and root-finding steps across all devices.
    pub interval_steps: usize,
    /// Device-cost evaluations spent on offloading.
    pub offload_evals: usize,
    pub commits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub energy_rates: Vec<f64>,
    /// Largest `(E/tau - E_max) / E_max` over devices.
    pub max_energy_violation: f64,
    pub committed_device: Option<usize>,
    pub newton_iterations: usize,
    pub offloaded: usize,
    pub ops: OpCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveTrace {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

impl SolveTrace {
    pub fn outer_iterations(&self) -> usize {
        self.iterations.len()
    }

    /// One row per outer iteration.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "cost", "max_energy_violation", "committed_device", "newton_iterations"])?;
        for r in &self.iterations {
            w.write_record([
                r.iteration.to_string(),
                r.cost.to_string(),
                r.max_energy_violation.to_string(),
                r.committed_device.map(|d| d.to_string()).unwrap_or_default(),
                r.newton_iterations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Step {
    x: OffloadVector,
    committed: Option<usize>,
    evals: usize,
    commits: usize,
}

fn offload_step(instance: &Instance, tau: &[f64], mu: &[f64], x: &OffloadVector, spec: &LoopSpec) -> Step {
    let n = instance.devices();
    let ctx = OffloadingContext::new(instance, tau, mu, spec.objective);
    match spec.policy {
        OffloadPolicy::BestResponse(rule) => {
            let out = solve_offloading(&ctx, x, rule);
            Step {
                committed: out.commits.last().map(|c| c.device),
                commits: out.commits.len(),
                evals: out.evaluations,
                x: out.x,
            }
        }
        OffloadPolicy::AllLocal => Step {
            x: OffloadVector::all_local(n),
            committed: None,
            evals: 0,
            commits: 0,
        },
        OffloadPolicy::Greedy => {
            let base = ctx.system_cost(x);
            let mut pick: Option<(usize, f64)> = None;
            let mut evals = n;
            for d in (0..n).filter(|&d| !x.get(d) && instance.capacity_admits(d, x)) {
                let after = ctx.system_cost(&x.flipped(d));
                evals += n;
                let gain = base - after;
                if after < base - 1e-12 * base.abs().max(1.0) && pick.map_or(true, |(_, g)| gain > g) {
                    pick = Some((d, gain));
                }
            }
            let mut next = x.clone();
            if let Some((d, _)) = pick {
                next.set(d, true);
            }
            Step {
                x: next,
                committed: pick.map(|(d, _)| d),
                evals,
                commits: usize::from(pick.is_some()),
            }
        }
        OffloadPolicy::Isolated { prior } => {
            let total: f64 = (0..n).map(|d| instance.statics(d).received_power).sum();
            let capacity = instance.config().capacity_threshold;
            let mut next = OffloadVector::all_local(n);
            let mut load = 0.0;
            for d in 0..n {
                let st = instance.statics(d);
                let assumed = prior * (total - st.received_power).max(0.0);
                let local = ctx.branch_cost(d, false, 0.0);
                let off = ctx.branch_cost(d, true, assumed);
                if off < local - 1e-12 * local.abs().max(1.0) && load + st.payload_bits <= capacity {
                    next.set(d, true);
                    load += st.payload_bits;
                }
            }
            let committed = (0..n).rev().find(|&d| next.get(d) != x.get(d));
            let commits = (0..n).filter(|&d| next.get(d) != x.get(d)).count();
            Step {
                x: next,
                committed,
                evals: 2 * n,
                commits,
            }
        }
        OffloadPolicy::Selfish => {
            let out = selfish_sweeps(&ctx, x);
            Step {
                x: out.x,
                committed: out.last_switch,
                evals: out.evaluations,
                commits: out.switches,
            }
        }
    }
}

fn interval_step(
    instance: &Instance,
    mu: &[f64],
    x: &OffloadVector,
    spec: &LoopSpec,
    tau: &mut [f64],
) -> usize {
    let tau_min = instance.config().tau_min;
    let mut steps = 0;
    for (d, t) in tau.iter_mut().enumerate() {
        match spec.interval {
            IntervalRule::Optimal => {
                let out = instance.optimal_sampling_interval(d, mu[d], x, spec.objective);
                steps += out.iterations;
                *t = out.tau;
            }
            IntervalRule::MinimumFeasible => {
                let energy = instance.branch_under(d, x).energy;
                *t = tau_min.max(energy / instance.profile(d).energy_budget);
            }
        }
    }
    steps
}

/// The shared outer loop behind JSO and every baseline.
pub fn run_outer_loop(instance: &Instance, init: &Decision, spec: &LoopSpec) -> Result<(Decision, SolveTrace)> {
    init.validate(instance)?;
    let cfg = instance.config();
    let budgets: Vec<f64> = instance.profiles().iter().map(|p| p.energy_budget).collect();
    let mut dec = init.clone();
    let mut prev = instance.system_cost(&dec.tau, &dec.mu, &dec.x, spec.objective);
    let mut records = Vec::new();
    let mut best: Option<((bool, f64), Decision)> = None;
    let mut converged = false;

    for iteration in 1..=cfg.max_outer_iters {
        let newton_iterations = interval_step(instance, &dec.mu, &dec.x, spec, &mut dec.tau);
        let step = offload_step(instance, &dec.tau, &dec.mu, &dec.x, spec);
        dec.x = step.x;
        let energy_rates = instance.energy_rates(&dec.tau, &dec.x);
        dec.mu = match cfg.step_rule {
            StepRule::Scaled => update_multipliers_scaled(&energy_rates, &budgets, &dec.mu, cfg.lagrange_step),
            StepRule::Fixed => update_multipliers(&energy_rates, &budgets, &dec.mu, cfg.lagrange_step),
        };
        let cost = instance.system_cost(&dec.tau, &dec.mu, &dec.x, spec.objective);
        let max_energy_violation = energy_rates
            .iter()
            .zip(&budgets)
            .map(|(r, b)| (r - b) / b)
            .fold(f64::NEG_INFINITY, f64::max);
        records.push(IterationRecord {
            iteration,
            cost,
            energy_rates,
            max_energy_violation,
            committed_device: step.committed,
            newton_iterations,
            offloaded: dec.x.offloaded_count(),
            ops: OpCounts {
                interval_steps: newton_iterations,
                offload_evals: step.evals,
                commits: step.commits,
            },
        });

        let feasible = max_energy_violation <= cfg.energy_tolerance;
        if (cost - prev).abs() < cfg.convergence_eps && feasible {
            converged = true;
            break;
        }
        prev = cost;

        let zero_mu = vec![0.0; dec.mu.len()];
        let key = if feasible {
            (false, instance.system_cost(&dec.tau, &zero_mu, &dec.x, spec.objective))
        } else {
            (true, max_energy_violation)
        };
        if best.as_ref().map_or(true, |(k, _)| key.partial_cmp(k) == Some(std::cmp::Ordering::Less)) {
            best = Some((key, dec.clone()));
        }
    }

    if !converged {
        log::warn!(
            "outer loop stopped after {} iterations without converging",
            cfg.max_outer_iters
        );
        if let Some((_, b)) = best {
            dec = b;
        }
    }
    Ok((
        dec,
        SolveTrace {
            iterations: records,
            converged,
        },
    ))
}

/// Joint sampling and offloading optimization.
pub fn solve_jso(instance: &Instance, init: &Decision, objective: Objective) -> Result<(Decision, SolveTrace)> {
    let spec = LoopSpec {
        interval: IntervalRule::Optimal,
        policy: OffloadPolicy::BestResponse(instance.config().commit_rule),
        objective,
    };
    run_outer_loop(instance, init, &spec)
}
