use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use maoi_core::config::ConfigDocument;
use maoi_core::experiments::{
    assert_trends, default_checks, emit_convergence_grid, generate_scenario, run_sweep, SweepParameter, SweepSpec,
    SweepTable,
};
use maoi_core::oracle::{validate_closed_form, write_oracle_csv, Z_99};
use maoi_core::{solve, Algorithm, Instance};

/// Sampling and offloading optimization for modality-aware age of information.
#[derive(Debug, Parser)]
#[command(name = "maoi", version)]
struct Cli {
    /// TOML configuration with optional [system], [scenario] and [[devices]] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Show solver warnings such as outer loops that hit the iteration cap.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve seeded scenarios over a parameter grid and write per-run and aggregate CSVs.
    Sweep(SweepArgs),
    /// Mean outer-iteration counts over a device-count by energy-budget grid.
    ConvergeGrid(GridArgs),
    /// Compare the closed-form average MAoI with trajectory simulation on the validation grid.
    ValidateOracle(OracleArgs),
    /// Check the standard trend expectations on a sweep CSV.
    AssertTrends(TrendArgs),
    /// Solve one scenario and write the per-device decision.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
struct SeedArgs {
    /// Number of replications.
    #[arg(long, default_value_t = 10)]
    seeds: u64,

    /// First seed; replications use consecutive seeds from here.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SeedArgs {
    fn list(&self) -> Vec<u64> {
        (0..self.seeds).map(|i| self.seed + i).collect()
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// device_count, energy_budget, local_cpu or audio_weight_increment.
    #[arg(long)]
    param: SweepParameter,

    /// Comma-separated grid values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,

    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',', default_value = "jso,jso_a,fmi,flc,gmo,idd,dbro")]
    algorithms: Vec<Algorithm>,

    #[command(flatten)]
    seeds: SeedArgs,

    /// Device count when the swept parameter is not the device count.
    #[arg(long, default_value_t = 10)]
    devices: usize,

    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Add a wall-clock column. The output is then no longer reproducible byte for byte.
    #[arg(long)]
    wall_time: bool,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long = "devices", value_delimiter = ',', required = true)]
    device_grid: Vec<usize>,

    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<f64>,

    #[command(flatten)]
    seeds: SeedArgs,

    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Also check the scaling trends and exit nonzero when one fails.
    #[arg(long)]
    check: bool,

    /// Tolerated reversal as a fraction of each row or column range.
    #[arg(long, default_value_t = 0.05)]
    slack: f64,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 100_000)]
    updates: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrendArgs {
    /// Per-run CSV written by `sweep`.
    #[arg(long)]
    table: PathBuf,

    /// Tolerated reversal as a fraction of the curve range.
    #[arg(long, default_value_t = 0.05)]
    slack: f64,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, default_value = "jso")]
    algorithm: Algorithm,

    /// Devices to generate when the configuration lists none.
    #[arg(long, default_value_t = 10)]
    devices: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<ConfigDocument> {
    match path {
        Some(p) => ConfigDocument::load(p).with_context(|| format!("reading configuration {}", p.display())),
        None => Ok(ConfigDocument::default()),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn sweep(doc: &ConfigDocument, args: &SweepArgs) -> Result<bool> {
    let mut spec = SweepSpec::new(args.param, args.values.clone(), args.algorithms.clone(), args.seeds.list());
    let priority = spec.config.weight_priority_scheduling;
    spec.config = doc.system.clone();
    spec.config.weight_priority_scheduling |= priority;
    spec.settings = doc.scenario.clone();
    spec.devices = args.devices;
    spec.record_wall_time = args.wall_time;
    let table = run_sweep(&spec)?;
    table.write_csv(create(&args.out, "sweep.csv")?)?;
    table.write_aggregate_csv(create(&args.out, "sweep_aggregate.csv")?)?;
    if args.param == SweepParameter::AudioWeightIncrement {
        table.write_increments_csv(create(&args.out, "sweep_increments.csv")?)?;
    }
    let unconverged = table.rows.iter().filter(|r| !r.converged).count();
    println!(
        "{} rows written to {} ({unconverged} runs stopped at the iteration cap)",
        table.rows.len(),
        args.out.display()
    );
    Ok(true)
}

fn converge_grid(doc: &ConfigDocument, args: &GridArgs) -> Result<bool> {
    let grid = emit_convergence_grid(&args.device_grid, &args.budgets, &args.seeds.list(), &doc.scenario, &doc.system)?;
    grid.write_csv(create(&args.out, "convergence_grid.csv")?)?;
    println!("grid written to {}", args.out.display());
    if !args.check {
        return Ok(true);
    }
    let by_devices = grid.device_trend_violations(args.slack);
    let by_budget = grid.budget_trend_violations(args.slack);
    let last = grid.budgets.len() - 1;
    let spread = grid.relative_spread(last);
    let mut ok = true;
    for (budget, a, b) in &by_devices {
        println!("[FAIL] iterations fall from D={a} to D={b} at E_max={budget}");
        ok = false;
    }
    for (d, a, b) in &by_budget {
        println!("[FAIL] iterations rise from E_max={a} to E_max={b} at D={d}");
        ok = false;
    }
    if by_devices.is_empty() && by_budget.is_empty() {
        println!("[PASS] iterations non-decreasing in D and non-increasing in E_max");
    }
    let flat = spread < 0.1;
    ok &= flat;
    println!(
        "[{}] relative spread across D at E_max={}: {spread:.4}",
        if flat { "PASS" } else { "FAIL" },
        grid.budgets[last]
    );
    Ok(ok)
}

fn validate_oracle(args: &OracleArgs) -> Result<bool> {
    let checks = validate_closed_form(args.updates, args.seed)?;
    write_oracle_csv(&checks, create(&args.out, "oracle.csv")?)?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).collect();
    for c in &failed {
        let (lo, hi) = c.stats.interval(Z_99);
        println!(
            "[FAIL] lambda={} psi={} tau={} T={}: closed form {} outside [{lo}, {hi}]",
            c.lambda, c.psi, c.tau, c.t_sys, c.closed_form
        );
    }
    println!("{}/{} grid points bracketed", checks.len() - failed.len(), checks.len());
    Ok(failed.is_empty())
}

fn trends(args: &TrendArgs) -> Result<bool> {
    let file = File::open(&args.table).with_context(|| format!("opening {}", args.table.display()))?;
    let table = SweepTable::read_csv(file)?;
    let report = assert_trends(&table, &default_checks(&table, args.slack));
    if report.outcomes.is_empty() {
        bail!("no trend checks apply to this table");
    }
    print!("{report}");
    Ok(report.passed())
}

fn solve_one(doc: &ConfigDocument, args: &SolveArgs) -> Result<bool> {
    let instance: Instance = if doc.devices.is_empty() {
        generate_scenario(args.devices, args.seed, &doc.scenario, &doc.system)?.instance()?
    } else {
        doc.instance()?
    };
    let result = solve(&instance, args.algorithm)?;
    let mut w = create(&args.out, "decision.csv")?;
    writeln!(
        w,
        "device,offloaded,tau,mu,maoi_image,maoi_audio,maoi_signal,aoi_image,aoi_audio,aoi_signal,energy_rate,energy_violation"
    )?;
    for d in &result.report.devices {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            d.device,
            d.offloaded,
            d.tau,
            d.mu,
            d.maoi[0],
            d.maoi[1],
            d.maoi[2],
            d.aoi[0],
            d.aoi[1],
            d.aoi[2],
            d.energy_rate,
            d.energy_violation
        )?;
    }
    w.flush()?;
    let r = &result.report;
    println!(
        "{}: average MAoI {:.4}, average AoI {:.4}, {} of {} offloaded, {} outer iterations{}",
        args.algorithm,
        r.avg_maoi,
        r.avg_aoi,
        r.offloaded,
        r.devices.len(),
        result.trace.outer_iterations(),
        if result.trace.converged { "" } else { " (iteration cap reached)" }
    );
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool> {
    let doc = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Sweep(a) => sweep(&doc, a),
        Command::ConvergeGrid(a) => converge_grid(&doc, a),
        Command::ValidateOracle(a) => validate_oracle(a),
        Command::AssertTrends(a) => trends(a),
        Command::Solve(a) => solve_one(&doc, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "warn" } else { "error" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
