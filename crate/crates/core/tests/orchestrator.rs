use std::net::TcpListener;
use std::path::Path;
use std::thread;
use std::time::Duration;

use twostage::environment::{serve_plant, PlantSim, TcpPlantClient};
use twostage::model::{InitialCondition, Level, ResourcePoint, StepRecord, SystemSpec, TimeGrid};
use twostage::orchestrator::{
    relax_rto_on_infeasibility, run_experiment, run_experiment_with, sub_seed, EventKind,
    ExperimentConfig, ExperimentLog, SeedKey, Stage,
};
use twostage::report::compute_metrics;
use twostage::stages::{FixedHistory, PriceSeries, RtoProblem};

fn default_config() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    ExperimentConfig::from_file(path).unwrap()
}

fn default_log() -> ExperimentLog {
    let log = run_experiment(&default_config()).unwrap();
    assert!(log.completed(), "{:?}", log.failure);
    log
}

#[test]
fn default_config_loads() {
    let cfg = default_config();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.grid, TimeGrid::case_study());
    assert_eq!(cfg.system.resources.len(), 3);
    assert_eq!(cfg.prices.len(), 10);
    assert_eq!(cfg.forecast.steps_per_lead, 10);
    cfg.validate().unwrap();
}

#[test]
fn one_swo_per_coarse_step_and_one_rto_per_fine_step() {
    let log = default_log();
    assert_eq!(log.count(Stage::Swo), 10);
    assert_eq!(log.count(Stage::Rto), 100);
    for t in &log.taus {
        assert_eq!(t.sos.len(), 10);
        assert_eq!(t.measurements.len(), 10);
    }
}

#[test]
fn executed_steps_never_change() {
    let log = default_log();
    let d_tau = log.grid.delta(Level::Swo);
    for t in &log.taus {
        // every plan repeats the realized past exactly
        for past in 0..t.tau {
            let realized = &log.realized_swo.steps[past];
            let planned = t.plan.step(past).unwrap();
            assert_eq!(planned.p_grid, realized.p_grid, "tau {} step {past}", t.tau);
            for (a, b) in planned.resources.iter().zip(&realized.resources) {
                assert_eq!(a.state, b.state);
                assert_eq!(a.p_input, b.p_input);
            }
        }
        // every SoS repeats the fine steps already executed in its tau
        for sos in &t.sos {
            for k in 0..sos.issue {
                let m = t.measurements[k].record();
                let s = &sos.trajectory.steps[k];
                assert_eq!(s.p_grid, m.p_grid);
                for (a, b) in s.resources.iter().zip(&m.resources) {
                    assert_eq!((a.state, a.p_input), (b.state, b.p_input));
                }
            }
        }
        assert!(t.plan.grid_energy(t.tau, d_tau) >= 0.0);
    }
}

#[test]
fn coarse_feedback_aggregates_the_fine_steps() {
    let log = default_log();
    let n = log.grid.n_rto;
    for (tau, coarse) in log.realized_swo.steps.iter().enumerate() {
        let fine = &log.realized_rto.steps[tau * n..(tau + 1) * n];
        let mean = |f: &dyn Fn(&StepRecord) -> f64| fine.iter().map(f).sum::<f64>() / n as f64;
        assert!((coarse.p_grid - mean(&|s| s.p_grid)).abs() < 1e-9);
        assert!((coarse.total_input() - mean(&|s| s.total_input())).abs() < 1e-9);
        assert!((coarse.total_output() - mean(&|s| s.total_output())).abs() < 1e-9);
    }
    let out_fine = log.realized_rto.output_energy(log.grid.delta(Level::Rto));
    let out_coarse = log.realized_swo.output_energy(log.grid.delta(Level::Swo));
    assert!((out_fine - out_coarse).abs() < 1e-9);
}

#[test]
fn single_step_run_without_demand_stays_off() {
    let mut system = SystemSpec::electrolyzers(1);
    system.demand = Some(0.0);
    let mut cfg = ExperimentConfig::case_study(system);
    cfg.grid = TimeGrid::new(0.25, 0.25, 1, 1).unwrap();
    cfg.prices = PriceSeries::constant(50.0, 1);
    cfg.forecast.steps_per_lead = 1;
    let log = run_experiment(&cfg).unwrap();
    assert!(log.completed());
    assert_eq!(log.count(Stage::Swo), 1);
    assert_eq!(log.count(Stage::Rto), 1);
    let step = &log.realized_rto.steps[0];
    assert_eq!(step.resources[0].state, 0);
    assert_eq!(step.p_grid, 0.0);
    let report = compute_metrics(&log).unwrap();
    assert_eq!(report.grid_cost_eur, 0.0);
    assert_eq!(report.efficiency_realized, None);
    assert_eq!(report.taus[0].deviation_pct, None);
}

fn standby_problem<'a>(
    spec: &'a SystemSpec,
    grid: &'a TimeGrid,
    plan_step: &'a StepRecord,
    re: &'a [f64],
    history: &'a FixedHistory,
    initial: &'a [InitialCondition],
) -> RtoProblem<'a> {
    RtoProblem {
        spec,
        grid,
        plan_step,
        tau: 0,
        re_forecast: re,
        history,
        initial: Some(initial),
        pin_states: true,
        slack_penalty: None,
    }
}

#[test]
fn relaxed_budget_reports_the_shortfall() {
    let spec = SystemSpec::electrolyzers(1);
    let grid = TimeGrid::case_study();
    let history = FixedHistory::default();
    let re = vec![0.0; grid.n_rto];
    let settled = [InitialCondition {
        state: 1,
        p_input: 0.19,
        held_steps: None,
    }];
    let standby = |p_grid| StepRecord {
        resources: vec![ResourcePoint {
            state: 1,
            p_input: 0.19,
            p_output: 0.0,
        }],
        p_grid,
        p_re_used: 0.0,
    };

    // stand-by draws 0.19 kW; a 1 kW budget cannot be spent
    let step = standby(1.0);
    let p = standby_problem(&spec, &grid, &step, &re, &history, &settled);
    let sos = relax_rto_on_infeasibility(&p, 10.0, 1e-3).unwrap();
    assert!((sos.grid_slack_kwh - (0.19 - 1.0) * 0.25).abs() < 1e-9);
    assert!((sos.grid_energy(grid.delta_t) - 0.19 * 0.25).abs() < 1e-9);

    let step = standby(0.19);
    let p = standby_problem(&spec, &grid, &step, &re, &history, &settled);
    let sos = relax_rto_on_infeasibility(&p, 10.0, 1e-3).unwrap();
    assert!(sos.grid_slack_kwh.abs() < 1e-9);
}

#[test]
fn plant_over_tcp_gives_the_same_log() {
    let cfg = default_config();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let mut plant = PlantSim::new(cfg.system.clone(), cfg.actual_series().unwrap())
        .with_input_noise(cfg.plant_input_noise_kw, sub_seed(cfg.seed, SeedKey::Plant));
    let server = thread::spawn(move || serve_plant(&listener, &mut plant, Some(1)));

    let mut link = TcpPlantClient::connect(addr, Duration::from_secs(10)).unwrap();
    let remote = run_experiment_with(&cfg, &mut link, |_| {}).unwrap();
    drop(link);
    server.join().unwrap().unwrap();

    assert!(remote.completed(), "{:?}", remote.failure);
    assert!(!remote
        .events
        .iter()
        .any(|e| matches!(e.kind, EventKind::TransportRetry { .. })));
    let local = default_log();
    assert_eq!(remote.to_json().unwrap(), local.to_json().unwrap());
}

#[test]
fn log_survives_a_json_round_trip() {
    let log = default_log();
    let text = log.to_json().unwrap();
    let back = ExperimentLog::from_json(&text).unwrap();
    assert_eq!(back, log);
    assert_eq!(back.to_json().unwrap(), text);
}

#[test]
fn reported_cost_matches_the_last_plan() {
    let log = default_log();
    assert!(log.slack_taus().is_empty());
    let report = compute_metrics(&log).unwrap();
    // the last plan pins every earlier step to what happened and its own
    // step is spent exactly by the real-time stage
    let last = &log.taus.last().unwrap().plan;
    assert!((report.grid_cost_eur - last.cost_eur).abs() <= 1e-6);
    assert!((last.objective - last.cost_eur).abs() <= 1e-6);
}
