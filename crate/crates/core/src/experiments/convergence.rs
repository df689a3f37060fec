use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::scenario::{generate_scenario, ScenarioSettings};
use super::trends::{monotone_violations, Direction};
use crate::baselines::{solve, Algorithm};
use crate::error::{invalid, Result};
use crate::model::SystemConfig;

/// Mean outer-iteration counts over a device-count by energy-budget grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceGrid {
    pub devices: Vec<usize>,
    pub budgets: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `cells[i][j]` belongs to `devices[i]` and `budgets[j]`.
    pub cells: Vec<Vec<f64>>,
}

impl ConvergenceGrid {
    /// Matrix CSV: one row per device count, one column per budget.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["devices".to_string()];
        header.extend(self.budgets.iter().map(|b| format!("emax_{b}")));
        w.write_record(&header)?;
        for (d, row) in self.devices.iter().zip(&self.cells) {
            let mut rec = vec![d.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.cells.iter().map(|row| row[j]).collect()
    }

    /// Budgets at which iterations fall in device count by more than `slack` of the column range.
    pub fn device_trend_violations(&self, slack: f64) -> Vec<(f64, usize, usize)> {
        (0..self.budgets.len())
            .flat_map(|j| {
                monotone_violations(&self.column(j), Direction::NonDecreasing, slack)
                    .into_iter()
                    .map(move |(a, b)| (self.budgets[j], self.devices[a], self.devices[b]))
            })
            .collect()
    }

    /// Device counts at which iterations rise with the budget by more than `slack` of the row range.
    pub fn budget_trend_violations(&self, slack: f64) -> Vec<(usize, f64, f64)> {
        self.cells
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                monotone_violations(row, Direction::NonIncreasing, slack)
                    .into_iter()
                    .map(move |(a, b)| (self.devices[i], self.budgets[a], self.budgets[b]))
            })
            .collect()
    }

    /// `(max - min) / mean` of a budget column.
    pub fn relative_spread(&self, j: usize) -> f64 {
        let col = self.column(j);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        (max - min) / mean
    }
}

pub fn emit_convergence_grid(
    devices: &[usize],
    budgets: &[f64],
    seeds: &[u64],
    settings: &ScenarioSettings,
    config: &SystemConfig,
) -> Result<ConvergenceGrid> {
    if devices.is_empty() || budgets.is_empty() || seeds.is_empty() {
        return Err(invalid("grid", "device, budget and seed lists must be non-empty"));
    }
    let jobs: Vec<(usize, usize)> = (0..devices.len())
        .flat_map(|i| (0..budgets.len()).map(move |j| (i, j)))
        .collect();
    let means = jobs
        .par_iter()
        .map(|&(i, j)| -> Result<f64> {
            let mut s = settings.clone();
            s.base_profile.energy_budget = budgets[j];
            let mut total = 0usize;
            for &seed in seeds {
                let instance = generate_scenario(devices[i], seed, &s, config)?.instance()?;
                total += solve(&instance, Algorithm::Jso)?.trace.outer_iterations();
            }
            Ok(total as f64 / seeds.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let cells = means.chunks(budgets.len()).map(<[f64]>::to_vec).collect();
    Ok(ConvergenceGrid {
        devices: devices.to_vec(),
        budgets: budgets.to_vec(),
        seeds: seeds.to_vec(),
        cells,
    })
}
