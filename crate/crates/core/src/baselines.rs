//! Comparison schemes. Each one runs the same outer loop as the joint
//! optimizer and differs only in how it picks intervals or offloading.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MaoiError, Result};
use crate::instance::{CostReport, Instance};
use crate::jso::{run_outer_loop, Decision, IntervalRule, LoopSpec, OffloadPolicy, SolveTrace};
use crate::metric::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Joint sampling and offloading on the MAoI objective.
    Jso,
    /// The same pipeline on plain AoI.
    JsoA,
    /// Shortest energy-feasible interval.
    Fmi,
    /// Everything computed locally.
    Flc,
    /// Greedy permanent offloading.
    Gmo,
    /// Isolated decisions under an assumed interference level.
    Idd,
    /// Selfish sequential best responses.
    Dbro,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Jso,
        Algorithm::JsoA,
        Algorithm::Fmi,
        Algorithm::Flc,
        Algorithm::Gmo,
        Algorithm::Idd,
        Algorithm::Dbro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Jso => "jso",
            Algorithm::JsoA => "jso_a",
            Algorithm::Fmi => "fmi",
            Algorithm::Flc => "flc",
            Algorithm::Gmo => "gmo",
            Algorithm::Idd => "idd",
            Algorithm::Dbro => "dbro",
        }
    }

    pub fn loop_spec(self, instance: &Instance) -> LoopSpec {
        let cfg = instance.config();
        let (interval, policy, objective) = match self {
            Algorithm::Jso => (IntervalRule::Optimal, OffloadPolicy::BestResponse(cfg.commit_rule), Objective::Maoi),
            Algorithm::JsoA => (IntervalRule::Optimal, OffloadPolicy::BestResponse(cfg.commit_rule), Objective::Aoi),
            Algorithm::Fmi => (
                IntervalRule::MinimumFeasible,
                OffloadPolicy::BestResponse(cfg.commit_rule),
                Objective::Maoi,
            ),
            Algorithm::Flc => (IntervalRule::Optimal, OffloadPolicy::AllLocal, Objective::Maoi),
            Algorithm::Gmo => (IntervalRule::Optimal, OffloadPolicy::Greedy, Objective::Maoi),
            Algorithm::Idd => (
                IntervalRule::Optimal,
                OffloadPolicy::Isolated {
                    prior: cfg.idd_interference_prior,
                },
                Objective::Maoi,
            ),
            Algorithm::Dbro => (IntervalRule::Optimal, OffloadPolicy::Selfish, Objective::Maoi),
        };
        LoopSpec {
            interval,
            policy,
            objective,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = MaoiError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| MaoiError::InvalidParameter {
                name: "algorithm",
                reason: format!("unknown algorithm `{s}`; expected one of jso, jso_a, fmi, flc, gmo, idd, dbro"),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub algorithm: Algorithm,
    pub decision: Decision,
    pub trace: SolveTrace,
    /// Achieved ages and energy, always reporting both MAoI and AoI.
    pub report: CostReport,
}

/// Runs `algorithm` from the default starting point.
pub fn solve(instance: &Instance, algorithm: Algorithm) -> Result<SolveResult> {
    solve_from(instance, algorithm, &Decision::initial(instance))
}

pub fn solve_from(instance: &Instance, algorithm: Algorithm, init: &Decision) -> Result<SolveResult> {
    let (decision, trace) = run_outer_loop(instance, init, &algorithm.loop_spec(instance))?;
    let report = instance.report(&decision);
    Ok(SolveResult {
        algorithm,
        decision,
        trace,
        report,
    })
}

pub fn solve_fmi(instance: &Instance) -> Result<SolveResult> {
    solve(instance, Algorithm::Fmi)
}

pub fn solve_flc(instance: &Instance) -> Result<SolveResult> {
    solve(instance, Algorithm::Flc)
}

pub fn solve_gmo(instance: &Instance) -> Result<SolveResult> {
    solve(instance, Algorithm::Gmo)
}

pub fn solve_idd(instance: &Instance) -> Result<SolveResult> {
    solve(instance, Algorithm::Idd)
}

pub fn solve_dbro(instance: &Instance) -> Result<SolveResult> {
    solve(instance, Algorithm::Dbro)
}

pub fn solve_jso_a(instance: &Instance) -> Result<SolveResult> {
    solve(instance, Algorithm::JsoA)
}
