use maoi_core::baselines::{solve, solve_dbro, solve_flc, solve_fmi, solve_gmo, solve_idd};
use maoi_core::config::ConfigDocument;
use maoi_core::experiments::{generate_scenario, ScenarioSettings};
use maoi_core::jso::offloading::{is_nash, OffloadingContext};
use maoi_core::jso::solve_jso;
use maoi_core::{Algorithm, Decision, DeviceProfile, Instance, Objective, OffloadVector, SystemConfig};

fn scenario(d: usize, seed: u64, config: SystemConfig) -> Instance {
    generate_scenario(d, seed, &ScenarioSettings::default(), &config)
        .and_then(|s| s.instance())
        .unwrap()
}

#[test]
fn every_algorithm_respects_hard_constraints() {
    let inst = scenario(8, 21, SystemConfig::default());
    let cfg = inst.config();
    for algorithm in Algorithm::ALL {
        let r = solve(&inst, algorithm).unwrap();
        assert!(r.decision.tau.iter().all(|&t| t >= cfg.tau_min), "{algorithm}");
        assert!(inst.payload_load(&r.decision.x) <= cfg.capacity_threshold, "{algorithm}");
        assert!(r.decision.mu.iter().all(|&m| m >= 0.0), "{algorithm}");
        if r.trace.converged {
            assert!(r.report.max_relative_violation <= cfg.energy_tolerance, "{algorithm}");
        }
    }
}

#[test]
fn generous_budget_gives_minimum_interval() {
    let inst = Instance::new(
        vec![DeviceProfile {
            energy_budget: 50.0,
            ..DeviceProfile::default()
        }],
        SystemConfig::default(),
    )
    .unwrap();
    let r = solve(&inst, Algorithm::Jso).unwrap();
    assert!(r.trace.converged);
    assert_eq!(r.decision.tau[0], inst.config().tau_min);
    let curve = inst.curve(0, &r.decision.x, 0.0, Objective::Maoi);
    let grid_min = (0..5_000)
        .map(|i| curve.value(2.0 + 0.01 * i as f64))
        .fold(f64::INFINITY, f64::min);
    assert!(curve.value(2.0) <= grid_min);
}

#[test]
fn infinite_threshold_stops_after_one_iteration() {
    let config = SystemConfig {
        convergence_eps: f64::INFINITY,
        energy_tolerance: f64::INFINITY,
        ..SystemConfig::default()
    };
    let inst = scenario(5, 2, config);
    let (_, trace) = solve_jso(&inst, &Decision::initial(&inst), Objective::Maoi).unwrap();
    assert_eq!(trace.outer_iterations(), 1);
    assert!(trace.converged);
}

#[test]
fn flc_matches_jso_when_offloading_is_impossible() {
    let config = SystemConfig {
        capacity_threshold: 0.0,
        ..SystemConfig::default()
    };
    let inst = scenario(6, 8, config);
    let jso = solve(&inst, Algorithm::Jso).unwrap();
    let flc = solve_flc(&inst).unwrap();
    assert_eq!(jso.decision.x.offloaded_count(), 0);
    assert_eq!(jso.decision, flc.decision);
}

#[test]
fn potential_minimizer_is_a_nash_equilibrium() {
    for seed in 0..12u64 {
        let d = 3 + (seed % 8) as usize;
        let inst = scenario(d, seed, SystemConfig::default());
        let tau: Vec<f64> = (0..d).map(|i| 2.0 + (i % 5) as f64).collect();
        let mu: Vec<f64> = (0..d).map(|i| 1.0 + 7.0 * (i % 3) as f64).collect();
        let ctx = OffloadingContext::new(&inst, &tau, &mu, Objective::Maoi);
        let best = (0..1u32 << d)
            .map(|bits| {
                let v: Vec<u8> = (0..d).map(|i| ((bits >> i) & 1) as u8).collect();
                OffloadVector::from_bits(&v)
            })
            .filter(|x| inst.payload_load(x) <= inst.config().capacity_threshold)
            .min_by(|a, b| ctx.potential(a).total_cmp(&ctx.potential(b)))
            .unwrap();
        assert!(is_nash(&ctx, &best), "seed {seed}: {best}");
    }
}

#[test]
fn baselines_are_reproducible() {
    let inst = scenario(7, 5, SystemConfig::default());
    for f in [solve_fmi, solve_flc, solve_gmo, solve_idd, solve_dbro] {
        assert_eq!(f(&inst).unwrap(), f(&inst).unwrap());
    }
}

#[test]
fn trace_csv_has_one_row_per_iteration() {
    let inst = scenario(3, 1, SystemConfig::default());
    let r = solve(&inst, Algorithm::Jso).unwrap();
    let mut buf = Vec::new();
    r.trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("iteration,cost,max_energy_violation,committed_device,newton_iterations\n"));
    assert_eq!(text.lines().count(), r.trace.outer_iterations() + 1);
}

#[test]
fn configuration_document_drives_the_solver() {
    let doc = ConfigDocument::parse(
        r#"
        [system]
        tau_min = 3.0
        commit_rule = "equilibrium"
        step_rule = "fixed"

        [[devices]]
        energy_budget = 20.0

        [[devices]]
        energy_budget = 20.0
        channel_gain = 0.0001
        "#,
    )
    .unwrap();
    let inst = doc.instance().unwrap();
    assert_eq!(inst.devices(), 2);
    let r = solve(&inst, Algorithm::Jso).unwrap();
    assert!(r.decision.tau.iter().all(|&t| t >= 3.0));
}
