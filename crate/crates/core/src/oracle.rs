//! Monte-Carlo simulation of the sawtooth age process, independent of the
//! closed-form average it is used to check.
//!
//! Each sampling interval draws its slope from the two-point distribution.
//! The area between deliveries `i-1` and `i` is
//! `Q_i = k_{i-1} (tau + Z)^2 / 2 - k_i Z^2 / 2` with `Z = T_sys`, and the time
//! average is `sum Q_i / (n tau)`. The standard error comes from batch means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::instance::Instance;
use crate::metric::{avg_maoi_modality, GrowthPmf};
use crate::radio::OffloadVector;

const BATCHES: usize = 100;

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub mean_maoi: f64,
    pub std_error: f64,
    /// Extra half-width for slope outcomes the sample never drew.
    pub unresolved_bound: f64,
    pub n_updates: usize,
    pub seed: u64,
}

impl TrajectoryStats {
    pub fn interval(&self, z: f64) -> (f64, f64) {
        let half = z * self.std_error + self.unresolved_bound;
        (self.mean_maoi - half, self.mean_maoi + half)
    }

    /// Whether `value` lies in the `z`-sigma interval, widened by a few ulp of the mean.
    pub fn brackets(&self, value: f64, z: f64) -> bool {
        let slack = 8.0 * f64::EPSILON * self.mean_maoi.abs();
        let (lo, hi) = self.interval(z);
        value >= lo - slack && value <= hi + slack
    }
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    sum: f64,
    carry: f64,
}

impl Accumulator {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

struct StreamEstimate {
    mean: f64,
    std_error: f64,
    unresolved_bound: f64,
}

fn simulate_stream(psi: f64, lambda: f64, tau: f64, t_sys: f64, n_updates: usize, rng: &mut ChaCha8Rng) -> StreamEstimate {
    let pmf = GrowthPmf::new(psi, lambda, tau);
    let mut elevated_draws = 0usize;
    let mut draw = || {
        if rng.random::<f64>() < pmf.p_elevated {
            elevated_draws += 1;
            pmf.elevated
        } else {
            1.0
        }
    };
    let batches = BATCHES.min(n_updates);
    let per_batch = n_updates / batches;
    let span = (tau + t_sys).powi(2);
    let tail = t_sys * t_sys;

    let mut total = Accumulator::default();
    let mut batch_means = Vec::with_capacity(batches);
    let mut prev = draw();
    for b in 0..batches {
        let len = if b + 1 == batches { n_updates - per_batch * (batches - 1) } else { per_batch };
        let mut acc = Accumulator::default();
        for _ in 0..len {
            let k = draw();
            acc.add(0.5 * prev * span - 0.5 * k * tail);
            prev = k;
        }
        total.add(acc.total());
        batch_means.push(acc.total() / (len as f64 * tau));
    }
    let mean = total.total() / (n_updates as f64 * tau);
    let bm = batch_means.iter().sum::<f64>() / batches as f64;
    let var = batch_means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches as f64 - 1.0).max(1.0);

    let draws = n_updates + 1;
    let one_sided = draws == elevated_draws || elevated_draws == 0;
    let unresolved_bound = if one_sided && pmf.elevated != 1.0 {
        let p_upper = -(0.005f64.ln() / draws as f64).exp_m1();
        p_upper * (pmf.elevated - 1.0).abs() * 0.5 * (span - tail) / tau
    } else {
        0.0
    };
    StreamEstimate {
        mean,
        std_error: (var / batches as f64).sqrt(),
        unresolved_bound,
    }
}

fn check(tau: f64, t_sys: f64, n_updates: usize) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(invalid("tau", "must be positive"));
    }
    if !(t_sys >= 0.0) || !t_sys.is_finite() {
        return Err(invalid("t_sys", "must be non-negative"));
    }
    if n_updates < 2 {
        return Err(invalid("n_updates", "at least two updates are required"));
    }
    Ok(())
}

/// Simulated long-run average MAoI of one modality.
pub fn simulate_avg_maoi(psi: f64, lambda: f64, tau: f64, t_sys: f64, n_updates: usize, seed: u64) -> Result<TrajectoryStats> {
    check(tau, t_sys, n_updates)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let est = simulate_stream(psi, lambda, tau, t_sys, n_updates, &mut rng);
    Ok(TrajectoryStats {
        mean_maoi: est.mean,
        std_error: est.std_error,
        unresolved_bound: est.unresolved_bound,
        n_updates,
        seed,
    })
}

/// Sum of three independent modality simulations of device `d`, one RNG stream each.
pub fn simulate_avg_maoi_device(
    instance: &Instance,
    d: usize,
    tau: f64,
    x: &OffloadVector,
    n_updates: usize,
    seed: u64,
) -> Result<TrajectoryStats> {
    instance.check_device(d)?;
    let t_sys = instance.branch_under(d, x).t_sys;
    let psi = instance.profile(d).maoi_weights.psi;
    let lambda = instance.config().event_rates;
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut unresolved_bound = 0.0;
    for s in 0..3 {
        check(tau, t_sys[s], n_updates)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        let est = simulate_stream(psi[s], lambda[s], tau, t_sys[s], n_updates, &mut rng);
        mean += est.mean;
        var += est.std_error * est.std_error;
        unresolved_bound += est.unresolved_bound;
    }
    Ok(TrajectoryStats {
        mean_maoi: mean,
        std_error: var.sqrt(),
        unresolved_bound,
        n_updates,
        seed,
    })
}

/// Closed form against simulation at one point of the validation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleCheck {
    pub psi: f64,
    pub lambda: f64,
    pub tau: f64,
    pub t_sys: f64,
    pub closed_form: f64,
    pub stats: TrajectoryStats,
    pub bracketed: bool,
}

impl OracleCheck {
    /// With zero weight the age is the deterministic `tau / 2 + T_sys`; both the
    /// closed form and the simulation must hit it to within a few ulp.
    pub fn exact_when_unweighted(&self) -> bool {
        if self.psi != 0.0 {
            return true;
        }
        let target = 0.5 * self.tau + self.t_sys;
        let tol = 4.0 * f64::EPSILON * target;
        (self.closed_form - target).abs() <= tol && (self.stats.mean_maoi - target).abs() <= tol
    }

    pub fn passed(&self) -> bool {
        self.bracketed && self.exact_when_unweighted()
    }
}

pub const ORACLE_LAMBDAS: [f64; 3] = [0.2, 0.8, 2.0];
pub const ORACLE_PSIS: [f64; 3] = [0.0, 1.0, 5.0];
pub const ORACLE_TAUS: [f64; 3] = [2.0, 5.0, 10.0];
pub const ORACLE_T_SYS: [f64; 2] = [0.0, 4.0];

/// Simulates every grid point with `n_updates` updates. Point `i` in
/// lambda-psi-tau-T order uses seed `seed + i`.
pub fn validate_closed_form(n_updates: usize, seed: u64) -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    for lambda in ORACLE_LAMBDAS {
        for psi in ORACLE_PSIS {
            for tau in ORACLE_TAUS {
                for t_sys in ORACLE_T_SYS {
                    let stats = simulate_avg_maoi(psi, lambda, tau, t_sys, n_updates, seed.wrapping_add(out.len() as u64))?;
                    let closed_form = avg_maoi_modality(psi, lambda, tau, t_sys);
                    out.push(OracleCheck {
                        psi,
                        lambda,
                        tau,
                        t_sys,
                        closed_form,
                        stats,
                        bracketed: stats.brackets(closed_form, Z_99),
                    });
                }
            }
        }
    }
    Ok(out)
}

pub fn write_oracle_csv<W: std::io::Write>(checks: &[OracleCheck], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "lambda",
        "psi",
        "tau",
        "t_sys",
        "closed_form",
        "simulated",
        "std_error",
        "unresolved_bound",
        "ci_low",
        "ci_high",
        "seed",
        "passed",
    ])?;
    for c in checks {
        let (lo, hi) = c.stats.interval(Z_99);
        w.write_record([
            c.lambda.to_string(),
            c.psi.to_string(),
            c.tau.to_string(),
            c.t_sys.to_string(),
            c.closed_form.to_string(),
            c.stats.mean_maoi.to_string(),
            c.stats.std_error.to_string(),
            c.stats.unresolved_bound.to_string(),
            lo.to_string(),
            hi.to_string(),
            c.stats.seed.to_string(),
            c.passed().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
