//! Per-device sampling interval.
//!
//! The penalized cost is strictly convex below the threshold
//! `min_s 2 (1 - lambda_s T_s) / lambda_s`, where projected Newton finds the
//! minimizer. Above it a closed-form surrogate minimizer gives a feasible
//! approximation. Because the surrogate freezes the growth term at the
//! threshold, it under-estimates the cost further out, so the region above
//! the threshold is also scanned for sign changes of the derivative and the
//! cheapest candidate wins.

use serde::Serialize;

use crate::error::{MaoiError, Result};
use crate::instance::Instance;
use crate::metric::{growth_rate_expectation, CostCurve, Objective};
use crate::radio::OffloadVector;

/// Cells of the derivative scan on the outer region.
const SCAN_CELLS: usize = 64;
const BISECTION_LIMIT: usize = 200;

pub fn convexity_threshold(curve: &CostCurve) -> f64 {
    (0..3)
        .map(|s| 2.0 * (1.0 - curve.lambda[s] * curve.t_sys[s]) / curve.lambda[s])
        .fold(f64::INFINITY, f64::min)
}

/// Minimizer of the surrogate `G(tau) = sum_s E[K_s](tau_upper) (tau/2 + T_s) + mu E / tau`.
pub fn surrogate_minimizer(curve: &CostCurve, tau_upper: f64) -> f64 {
    let growth: f64 = (0..3)
        .map(|s| growth_rate_expectation(curve.psi[s], curve.lambda[s], tau_upper))
        .sum();
    (2.0 * curve.mu * curve.energy / growth).sqrt()
}

pub fn feasible_approximation(threshold: f64, tau_min: f64, surrogate: f64) -> f64 {
    threshold.max(tau_min).max(surrogate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOutcome {
    pub tau: f64,
    pub iterations: usize,
    pub converged: bool,
    pub used_bisection: bool,
}

/// Projected Newton on `[tau_min, threshold]`, falling back to bisection on
/// the derivative if the curvature ever fails to be positive.
pub fn newton_refine(
    curve: &CostCurve,
    tau_init: f64,
    tau_min: f64,
    threshold: f64,
    tol: f64,
    max_iters: usize,
) -> Result<NewtonOutcome> {
    if !(tau_min < threshold) {
        return Err(MaoiError::Precondition(format!(
            "convex region is empty: tau_min {tau_min} >= threshold {threshold}"
        )));
    }
    let mut tau = tau_init.clamp(tau_min, threshold);
    for iter in 1..=max_iters {
        let h = curve.d2(tau);
        if !(h > 0.0) {
            let (root, steps) = bisect_derivative(curve, tau_min, threshold, tol);
            return Ok(NewtonOutcome {
                tau: root,
                iterations: iter + steps,
                converged: true,
                used_bisection: true,
            });
        }
        let next = (tau - curve.d1(tau) / h).clamp(tau_min, threshold);
        let step = (next - tau).abs();
        tau = next;
        if step < tol {
            return Ok(NewtonOutcome {
                tau,
                iterations: iter,
                converged: true,
                used_bisection: false,
            });
        }
    }
    Ok(NewtonOutcome {
        tau,
        iterations: max_iters,
        converged: false,
        used_bisection: false,
    })
}

/// Minimizer of a function whose derivative is increasing on `[lo, hi]`.
fn bisect_derivative(curve: &CostCurve, mut lo: f64, mut hi: f64, tol: f64) -> (f64, usize) {
    if curve.d1(lo) >= 0.0 {
        return (lo, 0);
    }
    if curve.d1(hi) <= 0.0 {
        return (hi, 0);
    }
    let mut steps = 0;
    while hi - lo > tol && steps < BISECTION_LIMIT {
        let mid = 0.5 * (lo + hi);
        if curve.d1(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    (0.5 * (lo + hi), steps)
}

/// Safeguarded Newton for a root of the derivative in `[lo, hi]` with `d1(lo) < 0 <= d1(hi)`.
fn bracketed_root(curve: &CostCurve, mut lo: f64, mut hi: f64, tol: f64, max_iters: usize) -> (f64, usize) {
    let mut tau = 0.5 * (lo + hi);
    for iter in 1..=max_iters.max(BISECTION_LIMIT) {
        let g = curve.d1(tau);
        if g < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let h = curve.d2(tau);
        let newton = tau - g / h;
        let next = if h > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - tau).abs();
        tau = next;
        if step < tol || hi - lo < tol {
            return (tau, iter);
        }
    }
    (tau, max_iters)
}

/// Best local minimizer of the cost on `[tau_upper, inf)`. Beyond
/// `sqrt(2 mu E / 3)` the derivative is positive, so only the bounded part is scanned.
pub fn refine_outer_region(curve: &CostCurve, tau_upper: f64, tol: f64, max_iters: usize) -> (f64, usize) {
    let cap = (2.0 * curve.mu * curve.energy / 3.0).sqrt();
    if cap <= tau_upper {
        return (tau_upper, 0);
    }
    let mut best = (tau_upper, curve.value(tau_upper));
    let mut iterations = 0;
    let ratio = (cap / tau_upper).powf(1.0 / SCAN_CELLS as f64);
    let mut left = tau_upper;
    let mut g_left = curve.d1(left);
    for k in 1..=SCAN_CELLS {
        let right = if k == SCAN_CELLS { cap } else { tau_upper * ratio.powi(k as i32) };
        let g_right = curve.d1(right);
        if g_left < 0.0 && g_right >= 0.0 {
            let (root, steps) = bracketed_root(curve, left, right, tol, max_iters);
            iterations += steps;
            let value = curve.value(root);
            if value < best.1 {
                best = (root, value);
            }
        }
        left = right;
        g_left = g_right;
    }
    (best.0, iterations)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Approximate,
    Newton,
    OuterRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingOutcome {
    pub tau: f64,
    pub chosen: Candidate,
    pub threshold: f64,
    pub upper: f64,
    pub surrogate: f64,
    pub approx: f64,
    pub newton: Option<NewtonOutcome>,
    pub outer: Option<f64>,
    /// Newton plus root-finding steps spent on this device.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSettings {
    pub tau_min: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub outer_region: bool,
}

/// Candidate selection by true cost; ties keep the approximate candidate.
pub fn optimal_interval(curve: &CostCurve, settings: &SamplingSettings) -> SamplingOutcome {
    let threshold = convexity_threshold(curve);
    let upper = settings.tau_min.max(threshold);
    let surrogate = surrogate_minimizer(curve, upper);
    let approx = feasible_approximation(threshold, settings.tau_min, surrogate);

    let mut tau = approx;
    let mut best = curve.value(approx);
    let mut chosen = Candidate::Approximate;
    let mut iterations = 0;

    let newton = if settings.tau_min < threshold {
        let init = 0.5 * (settings.tau_min + threshold);
        newton_refine(curve, init, settings.tau_min, threshold, settings.tol, settings.max_iters).ok()
    } else {
        None
    };
    if let Some(n) = newton {
        iterations += n.iterations;
        let value = curve.value(n.tau);
        if value < best {
            tau = n.tau;
            best = value;
            chosen = Candidate::Newton;
        }
    }

    let outer = if settings.outer_region {
        let (t, steps) = refine_outer_region(curve, upper, settings.tol, settings.max_iters);
        iterations += steps;
        if curve.value(t) < best {
            tau = t;
            chosen = Candidate::OuterRegion;
        }
        Some(t)
    } else {
        None
    };

    SamplingOutcome {
        tau,
        chosen,
        threshold,
        upper,
        surrogate,
        approx,
        newton,
        outer,
        iterations,
    }
}

impl Instance {
    pub fn sampling_settings(&self) -> SamplingSettings {
        let c = self.config();
        SamplingSettings {
            tau_min: c.tau_min,
            tol: c.newton_tol,
            max_iters: c.newton_max_iters,
            outer_region: c.outer_region_refinement,
        }
    }

    /// Optimal sampling interval of device `d` with `x` and `mu` held fixed.
    pub fn optimal_sampling_interval(
        &self,
        d: usize,
        mu: f64,
        x: &OffloadVector,
        objective: Objective,
    ) -> SamplingOutcome {
        optimal_interval(&self.curve(d, x, mu, objective), &self.sampling_settings())
    }
}
