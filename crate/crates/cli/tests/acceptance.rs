//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any of them fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use maoi_core::experiments::{
    assert_trends, default_checks, emit_convergence_grid, generate_scenario, run_sweep, Metric, ScenarioSettings,
    SweepParameter, SweepSpec, SweepTable, TrendCheck,
};
use maoi_core::jso::offloading::{is_nash, solve_offloading, OffloadingContext};
use maoi_core::oracle::validate_closed_form;
use maoi_core::{Algorithm, CommitRule, CostCurve, Objective, OffloadVector, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 10;
const SLACK: f64 = 0.05;
const DEVICE_GRID: [f64; 4] = [5.0, 10.0, 15.0, 20.0];
const BUDGET_GRID: [f64; 6] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
const WEIGHT_GRID: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];

struct Outcome {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn seeds() -> Vec<u64> {
    (0..SEEDS).collect()
}

fn closed_form() -> (bool, String) {
    let start = Instant::now();
    let checks = validate_closed_form(100_000, 0).expect("oracle grid");
    let elapsed = start.elapsed().as_secs_f64();
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("(lambda={}, psi={}, tau={}, T={})", c.lambda, c.psi, c.tau, c.t_sys))
        .collect();
    let unweighted = checks.iter().filter(|c| c.psi == 0.0).count();
    (
        failed.is_empty() && elapsed < 60.0,
        format!(
            "{}/{} points bracketed at 99%, {unweighted} zero-weight points exact, {elapsed:.2} s{}",
            checks.len() - failed.len(),
            checks.len(),
            if failed.is_empty() { String::new() } else { format!("; outside: {}", failed.join(" ")) }
        ),
    )
}

fn random_curve(rng: &mut ChaCha8Rng) -> CostCurve {
    CostCurve {
        psi: std::array::from_fn(|_| rng.random_range(0.0..5.0)),
        lambda: std::array::from_fn(|_| rng.random_range(0.1..3.0)),
        t_sys: std::array::from_fn(|_| rng.random_range(0.0..20.0)),
        mu: rng.random_range(0.0..100.0),
        energy: rng.random_range(0.01..20.0),
        energy_budget: rng.random_range(0.1..5.0),
    }
}

fn derivatives() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let (mut worst1, mut worst2) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let c = random_curve(&mut rng);
        let tau = rng.random_range(1.0..30.0);
        let fd1 = (c.value(tau + h) - c.value(tau - h)) / (2.0 * h);
        let fd2 = (c.d1(tau + h) - c.d1(tau - h)) / (2.0 * h);
        worst1 = worst1.max((fd1 - c.d1(tau)).abs() / c.d1(tau).abs());
        worst2 = worst2.max((fd2 - c.d2(tau)).abs() / c.d2(tau).abs());
    }
    (
        worst1 < 1e-6 && worst2 < 1e-6,
        format!("worst relative error: first {worst1:.2e}, second {worst2:.2e} over 100 draws"),
    )
}

fn sampling_optimality() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = SystemConfig::default();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let inst = generate_scenario(1, seed, &ScenarioSettings::default(), &config)
            .and_then(|s| s.instance())
            .expect("scenario");
        let mu = 10f64.powf(rng.random_range(-2.0..3.0));
        let x = OffloadVector::from_bits(&[rng.random_range(0..2u8)]);
        let out = inst.optimal_sampling_interval(0, mu, &x, Objective::Maoi);
        let curve = inst.curve(0, &x, mu, Objective::Maoi);
        let (lo, hi) = (config.tau_min, 10.0 * out.upper);
        let grid_min = (0..10_000)
            .map(|i| curve.value(lo + (hi - lo) * i as f64 / 9_999.0))
            .fold(f64::INFINITY, f64::min);
        let gap = (curve.value(out.tau) - grid_min) / grid_min.abs();
        worst = worst.max(gap);
        if gap > 1e-3 {
            failures.push(format!("seed {seed} (gap {gap:.2e})"));
        }
    }
    (
        failures.is_empty(),
        format!(
            "worst relative excess over the grid minimum {worst:.2e} on 50 instances{}",
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    )
}

fn nash_property() -> (bool, String) {
    let config = SystemConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut settled, mut decreasing, mut nash, mut nash_equilibrium_rule) = (0, 0, 0, 0);
    for seed in 0..100u64 {
        let d = 2 + (seed % 11) as usize;
        let inst = generate_scenario(d, seed, &ScenarioSettings::default(), &config)
            .and_then(|s| s.instance())
            .expect("scenario");
        let tau: Vec<f64> = (0..d).map(|_| rng.random_range(config.tau_min..20.0)).collect();
        let mu: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect();
        let ctx = OffloadingContext::new(&inst, &tau, &mu, Objective::Maoi);
        let start = OffloadVector::all_local(d);
        let out = solve_offloading(&ctx, &start, config.commit_rule);
        settled += usize::from(out.settled);
        let mut prev = ctx.system_cost(&start);
        let strictly = out.commits.iter().all(|c| {
            let ok = c.system_cost_after < prev;
            prev = c.system_cost_after;
            ok
        });
        decreasing += usize::from(strictly);
        nash += usize::from(is_nash(&ctx, &out.x));
        let alt = solve_offloading(&ctx, &start, CommitRule::Equilibrium);
        nash_equilibrium_rule += usize::from(alt.settled && is_nash(&ctx, &alt.x));
    }
    (
        settled == 100 && decreasing == 100 && nash == 100,
        format!(
            "commit rule {:?}: terminated {settled}/100, strictly decreasing system cost {decreasing}/100, \
             Nash {nash}/100 (equilibrium commit rule reaches Nash on {nash_equilibrium_rule}/100)",
            config.commit_rule
        ),
    )
}

fn feasibility(tables: &[&SweepTable]) -> (bool, String) {
    let mut converged = 0;
    let mut capped = 0;
    let mut bad = Vec::new();
    for t in tables {
        for r in t.rows.iter().filter(|r| r.algorithm == Algorithm::Jso) {
            if !r.converged {
                capped += 1;
                continue;
            }
            converged += 1;
            if r.min_tau_margin < 0.0 || r.payload_load > r.capacity || r.max_energy_violation > 0.05 {
                bad.push(format!(
                    "{}={} seed {} (tau margin {}, load {}, energy {:+.4})",
                    t.parameter, r.value, r.seed, r.min_tau_margin, r.payload_load, r.max_energy_violation
                ));
            }
        }
    }
    (
        bad.is_empty() && converged > 0,
        format!(
            "{converged} converged runs checked, {} violations; {capped} runs stopped at the iteration cap{}",
            bad.len(),
            if bad.is_empty() { String::new() } else { format!(": {}", bad.join("; ")) }
        ),
    )
}

fn metric_separation(table: &SweepTable) -> (bool, String) {
    let mut mean_ok = true;
    let mut notes = Vec::new();
    for &v in &table.values {
        let mean = |a: Algorithm, m: Metric| {
            let xs: Vec<f64> = table.rows_for(a, v).map(|r| r.metric(m)).collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        let (jm, am) = (mean(Algorithm::Jso, Metric::AvgMaoi), mean(Algorithm::JsoA, Metric::AvgMaoi));
        let (ja, aa) = (mean(Algorithm::Jso, Metric::AvgAoi), mean(Algorithm::JsoA, Metric::AvgAoi));
        if jm > am || aa > ja {
            mean_ok = false;
            notes.push(format!("D={v}: MAoI {jm:.4} vs {am:.4}, AoI {ja:.4} vs {aa:.4}"));
        }
    }
    let (mut differ, mut maoi_strict, mut aoi_strict) = (0usize, 0usize, 0usize);
    for &v in &table.values {
        for j in table.rows_for(Algorithm::Jso, v) {
            let a = table
                .rows_for(Algorithm::JsoA, v)
                .find(|a| a.seed == j.seed)
                .expect("matched row");
            if j.avg_maoi == a.avg_maoi && j.avg_aoi == a.avg_aoi {
                continue;
            }
            differ += 1;
            maoi_strict += usize::from(j.avg_maoi < a.avg_maoi);
            aoi_strict += usize::from(a.avg_aoi < j.avg_aoi);
        }
    }
    let share = |k: usize| if differ == 0 { 1.0 } else { k as f64 / differ as f64 };
    let passed = mean_ok && share(maoi_strict) >= 0.8 && share(aoi_strict) >= 0.8;
    (
        passed,
        format!(
            "means ordered at {}/{} device counts; of {differ} differing scenarios JSO has lower MAoI on {maoi_strict} \
             ({:.0}%), JSO-A lower AoI on {aoi_strict} ({:.0}%){}",
            table.values.len() - notes.len(),
            table.values.len(),
            100.0 * share(maoi_strict),
            100.0 * share(aoi_strict),
            if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
        ),
    )
}

fn summarize(label: &str, report: &maoi_core::experiments::TrendReport) -> (bool, Vec<String>) {
    let failed: Vec<String> = report
        .outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{label} {}: {}", o.name, o.detail))
        .collect();
    (failed.is_empty(), failed)
}

fn dominance(by_devices: &SweepTable, by_budget: &SweepTable) -> (bool, String) {
    let d_report = assert_trends(by_devices, &default_checks(by_devices, SLACK));
    let e_report = assert_trends(by_budget, &default_checks(by_budget, SLACK));
    let (d_ok, mut notes) = summarize("D sweep", &d_report);
    let (e_ok, e_notes) = summarize("E_max sweep", &e_report);
    notes.extend(e_notes);
    let checks = d_report.outcomes.len() + e_report.outcomes.len();
    (
        d_ok && e_ok,
        format!(
            "{}/{checks} trend checks hold{}",
            checks - notes.len(),
            if notes.is_empty() { String::new() } else { format!("; {}", notes.join(" | ")) }
        ),
    )
}

fn weight_increment(table: &SweepTable) -> (bool, String) {
    let checks: Vec<TrendCheck> = default_checks(table, SLACK)
        .into_iter()
        .filter(|c| matches!(c, TrendCheck::Monotone { .. }))
        .collect();
    let report = assert_trends(table, &checks);
    let (ok, notes) = summarize("weight sweep", &report);
    let audio: Vec<String> = table
        .curve(Algorithm::Jso, Metric::AoiAudio)
        .iter()
        .map(|p| format!("{:.3}", p.1))
        .collect();
    (
        ok,
        format!(
            "{}/{} monotone checks hold, audio AoI [{}]{}",
            report.outcomes.len() - notes.len(),
            report.outcomes.len(),
            audio.join(", "),
            if notes.is_empty() { String::new() } else { format!("; {}", notes.join(" | ")) }
        ),
    )
}

fn convergence_scaling() -> (bool, String) {
    let devices: Vec<usize> = DEVICE_GRID.iter().map(|&d| d as usize).collect();
    let grid = emit_convergence_grid(&devices, &BUDGET_GRID, &seeds(), &ScenarioSettings::default(), &SystemConfig::default())
        .expect("convergence grid");
    let by_devices = grid.device_trend_violations(SLACK);
    let by_budget = grid.budget_trend_violations(SLACK);
    let last = grid.budgets.len() - 1;
    let spread = grid.relative_spread(last);
    let rows: Vec<String> = grid
        .devices
        .iter()
        .zip(&grid.cells)
        .map(|(d, row)| {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:.0}")).collect();
            format!("D={d}: {}", cells.join("/"))
        })
        .collect();
    let mut notes: Vec<String> = by_devices
        .iter()
        .map(|(b, a, c)| format!("falls from D={a} to D={c} at E_max={b}"))
        .collect();
    notes.extend(by_budget.iter().map(|(d, a, b)| format!("rises from E_max={a} to E_max={b} at D={d}")));
    (
        notes.is_empty() && spread < 0.1,
        format!(
            "spread at E_max={} is {:.1}%; iterations per E_max {:?}: {}{}",
            grid.budgets[last],
            100.0 * spread,
            grid.budgets,
            rows.join(", "),
            if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
        ),
    )
}

fn run_cli(dir: &Path) -> std::io::Result<bool> {
    let bin = env!("CARGO_BIN_EXE_maoi");
    let invocations: [&[&str]; 4] = [
        &["sweep", "--param", "device_count", "--values", "3,6", "--algorithms", "jso,gmo,flc", "--seeds", "3"],
        &["converge-grid", "--devices", "3,5", "--budgets", "1,8", "--seeds", "2"],
        &["validate-oracle", "--updates", "20000", "--seed", "9"],
        &["solve", "--devices", "6", "--seed", "4"],
    ];
    let mut ok = true;
    for args in invocations {
        let status = Command::new(bin).args(args).arg("--out").arg(dir).output()?.status;
        ok &= status.success();
    }
    Ok(ok)
}

fn determinism() -> (bool, String) {
    let dirs = [tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir")];
    for d in &dirs {
        if !run_cli(d.path()).expect("running the CLI") {
            return (false, "a CLI invocation failed".to_string());
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .expect("output dir")
        .map(|e| e.expect("entry").file_name())
        .collect();
    names.sort();
    let mismatched: Vec<String> = names
        .iter()
        .filter(|n| std::fs::read(dirs[0].path().join(n)).ok() != std::fs::read(dirs[1].path().join(n)).ok())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    (
        mismatched.is_empty() && !names.is_empty(),
        format!(
            "{} CSV files compared across two runs{}",
            names.len(),
            if mismatched.is_empty() { String::new() } else { format!("; differing: {}", mismatched.join(", ")) }
        ),
    )
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let mut outcomes = Vec::new();
    let mut record = |id: u32, title: &'static str, (passed, detail): (bool, String)| {
        let line = Outcome {
            id,
            title,
            passed,
            detail,
        };
        println!(
            "criterion {:>2} [{}] {}: {}",
            line.id,
            if line.passed { "PASS" } else { "FAIL" },
            line.title,
            line.detail
        );
        outcomes.push(line);
    };

    record(1, "closed-form MAoI against simulation", closed_form());
    record(2, "derivatives against finite differences", derivatives());
    record(3, "optimal sampling interval against grid search", sampling_optimality());
    record(4, "offloading rounds end at a Nash equilibrium", nash_property());

    let all = Algorithm::ALL.to_vec();
    let by_devices = run_sweep(&SweepSpec::new(SweepParameter::DeviceCount, DEVICE_GRID.to_vec(), all.clone(), seeds()))
        .expect("device sweep");
    let by_budget = run_sweep(&SweepSpec::new(SweepParameter::EnergyBudget, BUDGET_GRID.to_vec(), all, seeds()))
        .expect("budget sweep");
    let by_weight = run_sweep(&SweepSpec::new(
        SweepParameter::AudioWeightIncrement,
        WEIGHT_GRID.to_vec(),
        vec![Algorithm::Jso],
        seeds(),
    ))
    .expect("weight sweep");

    record(5, "constraint feasibility at convergence", feasibility(&[&by_devices, &by_budget, &by_weight]));
    record(6, "MAoI and AoI objectives separate", metric_separation(&by_devices));
    record(7, "baseline dominance, flat FLC and budget plateau", dominance(&by_devices, &by_budget));
    record(8, "audio weight increment trends", weight_increment(&by_weight));
    record(9, "convergence scaling", convergence_scaling());
    record(10, "byte-identical CLI output", determinism());

    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        outcomes.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
