use std::fmt;

use serde::Serialize;

use super::sweep::{Metric, SweepParameter, SweepTable};
use crate::baselines::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TrendCheck {
    /// Seed-averaged curve is monotone, tolerating reversals up to `slack` of its range.
    Monotone {
        algorithm: Algorithm,
        metric: Metric,
        direction: Direction,
        slack: f64,
    },
    /// `winner` is no worse than every other algorithm at every grid point.
    Dominance {
        winner: Algorithm,
        metric: Metric,
        tolerance: f64,
    },
    /// Spread of the curve stays within `fraction` of the reference curve's range.
    Flat {
        algorithm: Algorithm,
        metric: Metric,
        reference: Algorithm,
        fraction: f64,
    },
    /// Last grid step changes the curve by less than `marginal` relative.
    Plateau {
        algorithm: Algorithm,
        metric: Metric,
        marginal: f64,
    },
}

impl TrendCheck {
    pub fn label(&self) -> String {
        match self {
            TrendCheck::Monotone {
                algorithm,
                metric,
                direction,
                ..
            } => format!("{algorithm} {} {direction:?}", metric.name()),
            TrendCheck::Dominance { winner, metric, .. } => format!("{winner} dominates on {}", metric.name()),
            TrendCheck::Flat {
                algorithm, metric, ..
            } => format!("{algorithm} {} flat", metric.name()),
            TrendCheck::Plateau {
                algorithm, metric, ..
            } => format!("{algorithm} {} plateaus", metric.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrendReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl TrendReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

impl fmt::Display for TrendReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "[{}] {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail)?;
        }
        Ok(())
    }
}

fn range(ys: &[f64]) -> f64 {
    let max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Consecutive index pairs that break the direction by more than `slack * range`.
pub fn monotone_violations(ys: &[f64], direction: Direction, slack: f64) -> Vec<(usize, usize)> {
    let allowance = slack * range(ys);
    ys.windows(2)
        .enumerate()
        .filter(|(_, w)| match direction {
            Direction::NonDecreasing => w[1] < w[0] - allowance,
            Direction::NonIncreasing => w[1] > w[0] + allowance,
        })
        .map(|(i, _)| (i, i + 1))
        .collect()
}

fn check_one(table: &SweepTable, check: &TrendCheck) -> CheckOutcome {
    let name = check.label();
    let (passed, detail) = match *check {
        TrendCheck::Monotone {
            algorithm,
            metric,
            direction,
            slack,
        } => {
            let curve = table.curve(algorithm, metric);
            let ys: Vec<f64> = curve.iter().map(|p| p.1).collect();
            let bad = monotone_violations(&ys, direction, slack);
            if bad.is_empty() {
                (true, format!("{} points, range {:.4}", ys.len(), range(&ys)))
            } else {
                let pairs: Vec<String> = bad
                    .iter()
                    .map(|&(i, j)| format!("{}={:.4} -> {}={:.4}", curve[i].0, ys[i], curve[j].0, ys[j]))
                    .collect();
                (false, format!("offending pairs: {}", pairs.join("; ")))
            }
        }
        TrendCheck::Dominance {
            winner,
            metric,
            tolerance,
        } => {
            let mine = table.curve(winner, metric);
            let mut bad = Vec::new();
            for &other in table.algorithms.iter().filter(|&&a| a != winner) {
                for ((v, w), (_, o)) in mine.iter().zip(table.curve(other, metric)) {
                    if *w > o + tolerance {
                        bad.push(format!("{other} at {v}: {w:.6} > {o:.6}"));
                    }
                }
            }
            if bad.is_empty() {
                (true, format!("{} grid points", mine.len()))
            } else {
                (false, bad.join("; "))
            }
        }
        TrendCheck::Flat {
            algorithm,
            metric,
            reference,
            fraction,
        } => {
            let ys: Vec<f64> = table.curve(algorithm, metric).iter().map(|p| p.1).collect();
            let rs: Vec<f64> = table.curve(reference, metric).iter().map(|p| p.1).collect();
            let (spread, limit) = (range(&ys), fraction * range(&rs));
            (spread <= limit, format!("spread {spread:.6} vs limit {limit:.6}"))
        }
        TrendCheck::Plateau {
            algorithm,
            metric,
            marginal,
        } => {
            let ys: Vec<f64> = table.curve(algorithm, metric).iter().map(|p| p.1).collect();
            if ys.len() < 2 {
                (false, "needs at least two grid points".to_string())
            } else {
                let steps: Vec<f64> = ys.windows(2).map(|w| ((w[1] - w[0]) / w[0]).abs()).collect();
                let start = steps.iter().rposition(|&s| s >= marginal).map_or(0, |i| i + 1);
                let last = *steps.last().unwrap_or(&0.0);
                (
                    last < marginal,
                    format!("plateau from grid index {start}, last relative step {last:.5}"),
                )
            }
        }
    };
    CheckOutcome { name, passed, detail }
}

pub fn assert_trends(table: &SweepTable, checks: &[TrendCheck]) -> TrendReport {
    TrendReport {
        outcomes: checks.iter().map(|c| check_one(table, c)).collect(),
    }
}

/// Standard trend expectations for a sweep over `table.parameter`.
pub fn default_checks(table: &SweepTable, slack: f64) -> Vec<TrendCheck> {
    let has = |a: Algorithm| table.algorithms.contains(&a);
    let mut checks = Vec::new();
    if has(Algorithm::Jso) && table.algorithms.iter().any(|&a| a != Algorithm::Jso && a != Algorithm::JsoA) {
        checks.push(TrendCheck::Dominance {
            winner: Algorithm::Jso,
            metric: Metric::AvgMaoi,
            tolerance: 1e-6,
        });
    }
    match table.parameter {
        SweepParameter::DeviceCount => {
            if has(Algorithm::Jso) {
                checks.push(TrendCheck::Monotone {
                    algorithm: Algorithm::Jso,
                    metric: Metric::AvgMaoi,
                    direction: Direction::NonDecreasing,
                    slack,
                });
                if has(Algorithm::Flc) {
                    checks.push(TrendCheck::Flat {
                        algorithm: Algorithm::Flc,
                        metric: Metric::AvgMaoi,
                        reference: Algorithm::Jso,
                        fraction: 0.02,
                    });
                }
            }
        }
        SweepParameter::EnergyBudget => {
            for &a in &table.algorithms {
                checks.push(TrendCheck::Monotone {
                    algorithm: a,
                    metric: Metric::AvgMaoi,
                    direction: Direction::NonIncreasing,
                    slack,
                });
                checks.push(TrendCheck::Plateau {
                    algorithm: a,
                    metric: Metric::AvgMaoi,
                    marginal: 0.01,
                });
            }
        }
        SweepParameter::LocalCpu => {
            for &a in &table.algorithms {
                checks.push(TrendCheck::Monotone {
                    algorithm: a,
                    metric: Metric::AvgMaoi,
                    direction: Direction::NonIncreasing,
                    slack,
                });
            }
        }
        SweepParameter::AudioWeightIncrement => {
            for &a in table.algorithms.iter().filter(|&&a| a == Algorithm::Jso) {
                for (metric, direction) in [
                    (Metric::AoiAudio, Direction::NonIncreasing),
                    (Metric::AoiImage, Direction::NonDecreasing),
                    (Metric::AoiSignal, Direction::NonDecreasing),
                    (Metric::MaoiImage, Direction::NonDecreasing),
                    (Metric::MaoiSignal, Direction::NonDecreasing),
                ] {
                    checks.push(TrendCheck::Monotone {
                        algorithm: a,
                        metric,
                        direction,
                        slack,
                    });
                }
            }
        }
    }
    checks
}
