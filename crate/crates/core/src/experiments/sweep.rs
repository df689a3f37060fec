use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{generate_scenario, ScenarioSettings};
use crate::baselines::{solve, Algorithm};
use crate::error::{invalid, MaoiError, Result};
use crate::model::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    DeviceCount,
    EnergyBudget,
    LocalCpu,
    AudioWeightIncrement,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::DeviceCount => "device_count",
            SweepParameter::EnergyBudget => "energy_budget",
            SweepParameter::LocalCpu => "local_cpu",
            SweepParameter::AudioWeightIncrement => "audio_weight_increment",
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = MaoiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "device_count" | "devices" | "d" => Ok(SweepParameter::DeviceCount),
            "energy_budget" | "budget" | "emax" => Ok(SweepParameter::EnergyBudget),
            "local_cpu" | "f_local" => Ok(SweepParameter::LocalCpu),
            "audio_weight_increment" | "audio_weight" => Ok(SweepParameter::AudioWeightIncrement),
            _ => Err(invalid("parameter", format!("unknown sweep parameter `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Device count for sweeps over other parameters.
    pub devices: usize,
    pub settings: ScenarioSettings,
    pub config: SystemConfig,
    /// Adds a wall-clock column, which makes the output run-dependent.
    pub record_wall_time: bool,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, values: Vec<f64>, algorithms: Vec<Algorithm>, seeds: Vec<u64>) -> Self {
        let mut config = SystemConfig::default();
        if parameter == SweepParameter::AudioWeightIncrement {
            config.weight_priority_scheduling = true;
        }
        Self {
            parameter,
            values,
            algorithms,
            seeds,
            devices: 10,
            settings: ScenarioSettings::default(),
            config,
            record_wall_time: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("values", "the sweep grid is empty"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one replication is required"));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("algorithms", "no algorithm selected"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "grid values must be finite"));
        }
        if self.parameter == SweepParameter::DeviceCount && self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
            return Err(invalid("values", "device counts must be positive integers"));
        }
        Ok(())
    }

    /// Scenario inputs for one grid value.
    fn point(&self, value: f64) -> (usize, ScenarioSettings, SystemConfig) {
        let mut devices = self.devices;
        let mut settings = self.settings.clone();
        let mut config = self.config.clone();
        match self.parameter {
            SweepParameter::DeviceCount => devices = value as usize,
            SweepParameter::EnergyBudget => settings.base_profile.energy_budget = value,
            SweepParameter::LocalCpu => {
                config.f_local = value;
                config.f_edge = config.f_edge.max(value);
            }
            SweepParameter::AudioWeightIncrement => settings.audio_weight_increment = value,
        }
        (devices, settings, config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AvgMaoi,
    AvgAoi,
    MaoiImage,
    MaoiAudio,
    MaoiSignal,
    AoiImage,
    AoiAudio,
    AoiSignal,
    MaxEnergyViolation,
    Iterations,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::AvgMaoi => "avg_maoi",
            Metric::AvgAoi => "avg_aoi",
            Metric::MaoiImage => "maoi_image",
            Metric::MaoiAudio => "maoi_audio",
            Metric::MaoiSignal => "maoi_signal",
            Metric::AoiImage => "aoi_image",
            Metric::AoiAudio => "aoi_audio",
            Metric::AoiSignal => "aoi_signal",
            Metric::MaxEnergyViolation => "max_energy_violation",
            Metric::Iterations => "iterations",
        }
    }

    pub const AGGREGATED: [Metric; 10] = [
        Metric::AvgMaoi,
        Metric::AvgAoi,
        Metric::MaoiImage,
        Metric::MaoiAudio,
        Metric::MaoiSignal,
        Metric::AoiImage,
        Metric::AoiAudio,
        Metric::AoiSignal,
        Metric::MaxEnergyViolation,
        Metric::Iterations,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub devices: usize,
    pub avg_maoi: f64,
    pub avg_aoi: f64,
    pub maoi: [f64; 3],
    pub aoi: [f64; 3],
    pub max_energy_violation: f64,
    pub offloaded: usize,
    pub payload_load: f64,
    pub capacity: f64,
    pub min_tau_margin: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: Option<f64>,
}

impl SweepRow {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::AvgMaoi => self.avg_maoi,
            Metric::AvgAoi => self.avg_aoi,
            Metric::MaoiImage => self.maoi[0],
            Metric::MaoiAudio => self.maoi[1],
            Metric::MaoiSignal => self.maoi[2],
            Metric::AoiImage => self.aoi[0],
            Metric::AoiAudio => self.aoi[1],
            Metric::AoiSignal => self.aoi[2],
            Metric::MaxEnergyViolation => self.max_energy_violation,
            Metric::Iterations => self.iterations as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub rows: Vec<SweepRow>,
}

/// Mean and sample standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

impl SweepTable {
    pub fn rows_for(&self, algorithm: Algorithm, value: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows
            .iter()
            .filter(move |r| r.algorithm == algorithm && r.value == value)
    }

    /// Seed-averaged `(value, mean)` points of one algorithm.
    pub fn curve(&self, algorithm: Algorithm, metric: Metric) -> Vec<(f64, f64)> {
        self.values
            .iter()
            .filter_map(|&v| {
                let xs: Vec<f64> = self.rows_for(algorithm, v).map(|r| r.metric(metric)).collect();
                (!xs.is_empty()).then(|| (v, mean_std(&xs).0))
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let with_time = self.rows.iter().any(|r| r.wall_time_s.is_some());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "parameter",
            "value",
            "seed",
            "algorithm",
            "devices",
            "avg_maoi",
            "avg_aoi",
            "maoi_image",
            "maoi_audio",
            "maoi_signal",
            "aoi_image",
            "aoi_audio",
            "aoi_signal",
            "max_energy_violation",
            "offloaded",
            "payload_load",
            "capacity",
            "min_tau_margin",
            "iterations",
            "converged",
        ];
        if with_time {
            header.push("wall_time_s");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                self.parameter.to_string(),
                r.value.to_string(),
                r.seed.to_string(),
                r.algorithm.to_string(),
                r.devices.to_string(),
                r.avg_maoi.to_string(),
                r.avg_aoi.to_string(),
            ];
            rec.extend(r.maoi.iter().chain(&r.aoi).map(f64::to_string));
            rec.extend([
                r.max_energy_violation.to_string(),
                r.offloaded.to_string(),
                r.payload_load.to_string(),
                r.capacity.to_string(),
                r.min_tau_margin.to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
            ]);
            if with_time {
                rec.push(r.wall_time_s.map(|t| t.to_string()).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`SweepTable::write_csv`]. Grid values and
    /// algorithms are listed in order of first appearance.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| invalid("csv", format!("missing column `{name}`")))
        };
        let names = [
            "parameter",
            "value",
            "seed",
            "algorithm",
            "devices",
            "avg_maoi",
            "avg_aoi",
            "maoi_image",
            "maoi_audio",
            "maoi_signal",
            "aoi_image",
            "aoi_audio",
            "aoi_signal",
            "max_energy_violation",
            "offloaded",
            "payload_load",
            "capacity",
            "min_tau_margin",
            "iterations",
            "converged",
        ];
        let idx = names.iter().map(|n| col(n)).collect::<Result<Vec<usize>>>()?;
        let wall = headers.iter().position(|h| h == "wall_time_s");
        let mut parameter = None;
        let mut values: Vec<f64> = Vec::new();
        let mut algorithms = Vec::new();
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(idx[i]).unwrap_or("");
            let num = |i: usize| -> Result<f64> {
                field(i)
                    .parse::<f64>()
                    .map_err(|e| invalid("csv", format!("row {}: column `{}`: {e}", line + 1, names[i])))
            };
            let int = |i: usize| -> Result<u64> {
                field(i)
                    .parse::<u64>()
                    .map_err(|e| invalid("csv", format!("row {}: column `{}`: {e}", line + 1, names[i])))
            };
            let p: SweepParameter = field(0).parse()?;
            if *parameter.get_or_insert(p) != p {
                return Err(invalid("csv", "rows mix several sweep parameters"));
            }
            let algorithm: Algorithm = field(3).parse()?;
            let row = SweepRow {
                value: num(1)?,
                seed: int(2)?,
                algorithm,
                devices: int(4)? as usize,
                avg_maoi: num(5)?,
                avg_aoi: num(6)?,
                maoi: [num(7)?, num(8)?, num(9)?],
                aoi: [num(10)?, num(11)?, num(12)?],
                max_energy_violation: num(13)?,
                offloaded: int(14)? as usize,
                payload_load: num(15)?,
                capacity: num(16)?,
                min_tau_margin: num(17)?,
                iterations: int(18)? as usize,
                converged: field(19)
                    .parse()
                    .map_err(|_| invalid("csv", format!("row {}: column `converged` is not a boolean", line + 1)))?,
                wall_time_s: wall.and_then(|w| rec.get(w)).and_then(|t| t.parse().ok()),
            };
            if !values.contains(&row.value) {
                values.push(row.value);
            }
            if !algorithms.contains(&algorithm) {
                algorithms.push(algorithm);
            }
            rows.push(row);
        }
        let parameter = parameter.ok_or_else(|| invalid("csv", "the table has no rows"))?;
        Ok(SweepTable {
            parameter,
            values,
            algorithms,
            rows,
        })
    }

    /// Mean and standard deviation over seeds per (value, algorithm).
    pub fn write_aggregate_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["parameter".to_string(), "value".into(), "algorithm".into(), "seeds".into()];
        for m in Metric::AGGREGATED {
            header.push(format!("{}_mean", m.name()));
            header.push(format!("{}_std", m.name()));
        }
        w.write_record(&header)?;
        for &v in &self.values {
            for &a in &self.algorithms {
                let rows: Vec<&SweepRow> = self.rows_for(a, v).collect();
                if rows.is_empty() {
                    continue;
                }
                let mut rec = vec![self.parameter.to_string(), v.to_string(), a.to_string(), rows.len().to_string()];
                for m in Metric::AGGREGATED {
                    let xs: Vec<f64> = rows.iter().map(|r| r.metric(m)).collect();
                    let (mean, std) = mean_std(&xs);
                    rec.push(mean.to_string());
                    rec.push(std.to_string());
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Per-modality changes against the first grid point of the same seed
    /// and algorithm, averaged over seeds.
    pub fn increments(&self) -> Vec<IncrementRow> {
        let Some(&base_value) = self.values.first() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for &v in &self.values {
            for &a in &self.algorithms {
                let mut d_maoi = Vec::new();
                let mut d_aoi = Vec::new();
                for r in self.rows_for(a, v) {
                    if let Some(b) = self.rows_for(a, base_value).find(|b| b.seed == r.seed) {
                        d_maoi.push(std::array::from_fn::<f64, 3, _>(|s| r.maoi[s] - b.maoi[s]));
                        d_aoi.push(std::array::from_fn::<f64, 3, _>(|s| r.aoi[s] - b.aoi[s]));
                    }
                }
                if d_maoi.is_empty() {
                    continue;
                }
                let n = d_maoi.len() as f64;
                let avg = |xs: &[[f64; 3]]| std::array::from_fn(|s| xs.iter().map(|x| x[s]).sum::<f64>() / n);
                out.push(IncrementRow {
                    value: v,
                    algorithm: a,
                    maoi: avg(&d_maoi),
                    aoi: avg(&d_aoi),
                });
            }
        }
        out
    }

    pub fn write_increments_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "value",
            "algorithm",
            "d_maoi_image",
            "d_maoi_audio",
            "d_maoi_signal",
            "d_aoi_image",
            "d_aoi_audio",
            "d_aoi_signal",
        ])?;
        for r in self.increments() {
            let mut rec = vec![r.value.to_string(), r.algorithm.to_string()];
            rec.extend(r.maoi.iter().chain(&r.aoi).map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementRow {
    pub value: f64,
    pub algorithm: Algorithm,
    pub maoi: [f64; 3],
    pub aoi: [f64; 3],
}

/// Solves every (grid value, seed) scenario with every algorithm. Jobs run in
/// parallel and rows come back sorted by grid position, seed and algorithm order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.seeds.len()).map(move |s| (v, s)))
        .collect();
    let chunks = jobs
        .par_iter()
        .map(|&(vi, si)| -> Result<Vec<(usize, usize, usize, SweepRow)>> {
            let value = spec.values[vi];
            let seed = spec.seeds[si];
            let (devices, settings, config) = spec.point(value);
            let instance = generate_scenario(devices, seed, &settings, &config)?.instance()?;
            spec.algorithms
                .iter()
                .enumerate()
                .map(|(ai, &algorithm)| {
                    let start = Instant::now();
                    let res = solve(&instance, algorithm)?;
                    let elapsed = start.elapsed().as_secs_f64();
                    let min_tau_margin = res
                        .decision
                        .tau
                        .iter()
                        .map(|t| t - config.tau_min)
                        .fold(f64::INFINITY, f64::min);
                    Ok((
                        vi,
                        si,
                        ai,
                        SweepRow {
                            value,
                            seed,
                            algorithm,
                            devices,
                            avg_maoi: res.report.avg_maoi,
                            avg_aoi: res.report.avg_aoi,
                            maoi: res.report.modality_maoi,
                            aoi: res.report.modality_aoi,
                            max_energy_violation: res.report.max_relative_violation,
                            offloaded: res.report.offloaded,
                            payload_load: res.report.payload_load,
                            capacity: config.capacity_threshold,
                            min_tau_margin,
                            iterations: res.trace.outer_iterations(),
                            converged: res.trace.converged,
                            wall_time_s: spec.record_wall_time.then_some(elapsed),
                        },
                    ))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut keyed: Vec<_> = chunks.into_iter().flatten().collect();
    keyed.sort_by_key(|&(v, s, a, _)| (v, s, a));
    Ok(SweepTable {
        parameter: spec.parameter,
        values: spec.values.clone(),
        algorithms: spec.algorithms.clone(),
        rows: keyed.into_iter().map(|(_, _, _, r)| r).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinality() {
        let mut spec = SweepSpec::new(SweepParameter::DeviceCount, vec![5.0], vec![Algorithm::Flc], vec![1]);
        assert_eq!(run_sweep(&spec).unwrap().rows.len(), 1);
        spec.values = vec![5.0, 10.0, 15.0];
        spec.seeds = vec![1, 2, 3];
        spec.algorithms = vec![Algorithm::Flc, Algorithm::Fmi];
        let table = run_sweep(&spec).unwrap();
        assert_eq!(table.rows.len(), 18);
        assert_eq!(table.rows[0].algorithm, Algorithm::Flc);
        assert_eq!(table.rows[1].algorithm, Algorithm::Fmi);
        assert_eq!(table.rows[17].devices, 15);
    }

    #[test]
    fn csv_round_trip() {
        let spec = SweepSpec::new(
            SweepParameter::EnergyBudget,
            vec![2.0, 0.5],
            vec![Algorithm::Fmi, Algorithm::Flc],
            vec![3, 4],
        );
        let table = run_sweep(&spec).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let back = SweepTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, table);
        assert!(SweepTable::read_csv("parameter,value\n".as_bytes()).is_err());
    }

    #[test]
    fn increments_are_relative_to_first_point() {
        let mut spec = SweepSpec::new(
            SweepParameter::AudioWeightIncrement,
            vec![0.0, 0.5],
            vec![Algorithm::Flc],
            vec![1, 2],
        );
        spec.devices = 3;
        let table = run_sweep(&spec).unwrap();
        let inc = table.increments();
        assert_eq!(inc.len(), 2);
        assert!(inc[0].maoi.iter().chain(&inc[0].aoi).all(|&v| v == 0.0));
        assert!(inc[1].maoi[1] > 0.0);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = SweepSpec::new(SweepParameter::DeviceCount, vec![], vec![Algorithm::Flc], vec![1]);
        assert!(run_sweep(&spec).is_err());
        spec.values = vec![2.5];
        assert!(run_sweep(&spec).is_err());
        spec.values = vec![2.0];
        spec.seeds.clear();
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn parameter_names() {
        for p in [
            SweepParameter::DeviceCount,
            SweepParameter::EnergyBudget,
            SweepParameter::LocalCpu,
            SweepParameter::AudioWeightIncrement,
        ] {
            assert_eq!(p.name().parse::<SweepParameter>().unwrap(), p);
        }
    }
}
