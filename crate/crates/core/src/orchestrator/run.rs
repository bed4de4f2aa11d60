use std::time::{Duration, Instant};

use log::{info, warn};

use crate::environment::{
    aggregate_mean, make_forecast, Measurement, PlantLink, PlantRequest, PlantSim,
};
use crate::error::{Error, Result};
use crate::model::{InitialCondition, Level, ResourcePoint, StepRecord, SystemSpec, Trajectory};
use crate::stages::{solve_rto, solve_swo, FixedHistory, Plan, RtoProblem, SoS, SwoProblem};

use super::config::{sub_seed, ExperimentConfig, SeedKey};
use super::log::{Event, EventKind, ExperimentLog, Failure, SolveRecord, Stage, TauLog};

/// One finished solve, as handed to a progress observer.
#[derive(Debug, Clone)]
pub struct Progress<'a> {
    pub record: &'a SolveRecord,
    pub elapsed: Duration,
}

impl Progress<'_> {
    /// `SWO tau=3 status=optimal obj=0.2143 time=0.41s`
    pub fn line(&self) -> String {
        let r = self.record;
        let k = r.k.map(|k| format!(" k={k}")).unwrap_or_default();
        format!(
            "{} tau={}{k} status={} obj={:.4} time={:.2}s",
            r.stage.label(),
            r.tau,
            r.status,
            r.objective,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Runs the experiment against an in-process [`PlantSim`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentLog> {
    run_experiment_observed(cfg, |p| info!("{}", p.line()))
}

pub fn run_experiment_observed(
    cfg: &ExperimentConfig,
    observer: impl FnMut(&Progress<'_>),
) -> Result<ExperimentLog> {
    cfg.validate()?;
    let actual = cfg.actual_series()?;
    let mut plant = PlantSim::new(cfg.system.clone(), actual)
        .with_input_noise(cfg.plant_input_noise_kw, sub_seed(cfg.seed, SeedKey::Plant));
    run_experiment_with(cfg, &mut plant, observer)
}

/// Runs the rolling two-stage loop, executing setpoints through `plant`.
///
/// For each coarse step `tau`: forecast the rest of the horizon, solve the
/// SWO with the realized past pinned, then for each fine step `k` solve the
/// RTO over the rest of `tau`, send step `k` to the plant and pin what it
/// reports. Stage failures that survive relaxation, and transport failures
/// that survive one retry, end the run early; the partial log is returned
/// with `failure` set. Configuration errors are returned as `Err`.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    plant: &mut dyn PlantLink,
    mut observer: impl FnMut(&Progress<'_>),
) -> Result<ExperimentLog> {
    cfg.validate()?;
    let actual = cfg.actual_series()?;
    let mut log = ExperimentLog {
        seed: cfg.seed,
        grid: cfg.grid,
        prices: cfg.prices.clone(),
        actual_re: actual.values.clone(),
        taus: Vec::new(),
        solves: Vec::new(),
        events: Vec::new(),
        realized_rto: Trajectory::default(),
        realized_swo: Trajectory::default(),
        failure: None,
    };
    let mut run = Run {
        cfg,
        actual: &actual.values,
        forecast_seed: sub_seed(cfg.seed, SeedKey::Forecast),
        conditions: cold_start(&cfg.system),
        measurements: Vec::new(),
        first_plan: None,
    };
    if let Err(e) = run.execute(&mut log, plant, &mut observer) {
        warn!("run stopped: {e}");
        log.failure = Some(Failure::from_error(&e));
    }

    let initial = cold_start(&cfg.system);
    log.realized_rto = Trajectory::new(run.measurements.iter().map(Measurement::record).collect())
        .with_initial(initial.clone());
    let n_rto = cfg.grid.n_rto;
    let mut swo_steps = Vec::new();
    for tau in 0..run.measurements.len() / n_rto {
        swo_steps.push(feedback_to_swo(&log.realized_rto, n_rto, tau + 1).steps[tau].clone());
    }
    log.realized_swo = Trajectory::new(swo_steps).with_initial(initial);
    Ok(log)
}

fn cold_start(spec: &SystemSpec) -> Vec<InitialCondition> {
    spec.resources
        .iter()
        .map(InitialCondition::cold_start)
        .collect()
}

/// Aggregates the first `n_tau` coarse steps of a realized fine trajectory
/// into pinned SWO history: powers are averaged (so energy is preserved),
/// states are taken at the end of each coarse step.
pub fn feedback_to_swo(realized: &Trajectory, n_rto: usize, n_tau: usize) -> FixedHistory {
    let steps = realized
        .steps
        .chunks(n_rto)
        .take(n_tau)
        .map(|chunk| {
            let n = chunk.len() as f64;
            let last = chunk.last().expect("chunks are non-empty");
            let mean = |f: &dyn Fn(&StepRecord) -> f64| chunk.iter().map(f).sum::<f64>() / n;
            StepRecord {
                resources: (0..last.resources.len())
                    .map(|r| ResourcePoint {
                        state: last.resources[r].state,
                        p_input: mean(&|s| s.resources[r].p_input),
                        p_output: mean(&|s| s.resources[r].p_output),
                    })
                    .collect(),
                p_grid: mean(&|s| s.p_grid),
                p_re_used: mean(&|s| s.p_re_used),
            }
        })
        .collect();
    FixedHistory::new(steps)
}

/// Resource conditions just before coarse step `tau` if `plan` had been
/// executed exactly, with dwell counted in fine steps.
///
/// A state held since the start of the plan and equal to the cold-start
/// state counts as settled.
pub fn conditions_from_plan(
    plan: &Plan,
    spec: &SystemSpec,
    n_rto: usize,
    tau: usize,
) -> Vec<InitialCondition> {
    let steps = &plan.trajectory.steps[..tau.min(plan.trajectory.len())];
    spec.resources
        .iter()
        .enumerate()
        .map(|(r, res)| {
            let Some(last) = steps.last() else {
                return InitialCondition::cold_start(res);
            };
            let point = last.resources[r];
            let run = steps
                .iter()
                .rev()
                .take_while(|s| s.resources[r].state == point.state)
                .count();
            let settled = run == steps.len() && point.state == res.initial_state;
            InitialCondition {
                state: point.state,
                p_input: point.p_input,
                held_steps: (!settled).then(|| (run * n_rto) as u32),
            }
        })
        .collect()
}

/// Re-solves an infeasible RTO with the grid budget relaxed by slack priced
/// at `penalty` kWh of output per kWh.
pub fn relax_rto_on_infeasibility(problem: &RtoProblem<'_>, penalty: f64, gap: f64) -> Result<SoS> {
    if penalty == 0.0 {
        warn!("relaxation penalty is 0: grid slack is free");
    }
    solve_rto(
        &RtoProblem {
            slack_penalty: Some(penalty),
            ..*problem
        },
        gap,
    )
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    actual: &'a [f64],
    forecast_seed: u64,
    /// Condition of each resource after the last executed fine step, with
    /// dwell counted in fine steps.
    conditions: Vec<InitialCondition>,
    measurements: Vec<Measurement>,
    first_plan: Option<Plan>,
}

impl Run<'_> {
    fn execute(
        &mut self,
        log: &mut ExperimentLog,
        plant: &mut dyn PlantLink,
        observer: &mut dyn FnMut(&Progress<'_>),
    ) -> Result<()> {
        let grid = self.cfg.grid;
        for tau in 0..grid.n_swo {
            let (plan, re_swo) = self.solve_swo(tau, log, observer)?;
            let first = self.first_plan.get_or_insert_with(|| plan.clone());
            let dt_tau = grid.delta(Level::Swo);
            let planned_initial_kwh = first.output_energy(tau, dt_tau);
            let planned_active_kwh = plan.output_energy(tau, dt_tau);
            log.taus.push(TauLog {
                tau,
                re_forecast_swo: re_swo,
                re_forecast_rto: Vec::new(),
                plan,
                sos: Vec::new(),
                measurements: Vec::new(),
                planned_initial_kwh,
                planned_active_kwh,
                realized_kwh: 0.0,
                deviation_pct: None,
            });

            let start = self.conditions.clone();
            for k in 0..grid.n_rto {
                let sos = self.solve_rto(tau, k, &start, log, observer)?;
                let step = &sos.trajectory.steps[k];
                let request = PlantRequest::from_step(grid.global_index(tau, k), step);
                let m = self.exchange(plant, &request, tau, k, log)?;
                for (r, p) in m.resources.iter().enumerate() {
                    if p.rejected {
                        log.events.push(Event {
                            tau,
                            k: Some(k),
                            kind: EventKind::Rejected { resource: r },
                        });
                    }
                    if p.clipped {
                        log.events.push(Event {
                            tau,
                            k: Some(k),
                            kind: EventKind::Clipped { resource: r },
                        });
                    }
                }
                self.advance(&m);
                let entry = log.taus.last_mut().expect("pushed above");
                entry.sos.push(sos);
                entry.measurements.push(m.clone());
                self.measurements.push(m);
            }

            let entry = log.taus.last_mut().expect("pushed above");
            entry.realized_kwh = entry
                .measurements
                .iter()
                .map(|m| m.resources.iter().map(|p| p.p_output).sum::<f64>())
                .sum::<f64>()
                * grid.delta(Level::Rto);
            entry.deviation_pct = (entry.planned_initial_kwh > 0.0).then(|| {
                100.0 * (entry.realized_kwh - entry.planned_initial_kwh) / entry.planned_initial_kwh
            });
        }
        Ok(())
    }

    fn realized(&self) -> Trajectory {
        Trajectory::new(self.measurements.iter().map(Measurement::record).collect())
    }

    fn solve_swo(
        &mut self,
        tau: usize,
        log: &mut ExperimentLog,
        observer: &mut dyn FnMut(&Progress<'_>),
    ) -> Result<(Plan, Vec<f64>)> {
        let grid = self.cfg.grid;
        let issue = grid.global_index(tau, 0);
        let total = grid.total_rto_steps();
        let series = crate::environment::ActualSeries::new(self.actual.to_vec(), grid.delta_t)?;
        let fc = make_forecast(
            &series,
            issue,
            total - issue,
            &self.cfg.forecast,
            self.forecast_seed,
        )?;
        let mut re: Vec<f64> = aggregate_mean(&self.actual[..issue], grid.n_rto);
        re.extend(aggregate_mean(&fc.values, grid.n_rto));

        let history = feedback_to_swo(&self.realized(), grid.n_rto, tau);
        let mut problem = SwoProblem {
            spec: &self.cfg.system,
            grid: &grid,
            prices: &self.cfg.prices,
            re_forecast: &re,
            history: &history,
            initial: None,
            demand_penalty: None,
        };
        let started = Instant::now();
        let (plan, relaxed) = match solve_swo(&problem, self.cfg.gap) {
            Ok(plan) => (plan, false),
            Err(e) if e.is_infeasible() && tau > 0 => {
                warn!("SWO tau={tau} infeasible ({e}); re-solving with demand slack");
                problem.demand_penalty = Some(self.cfg.relaxation_penalty);
                (solve_swo(&problem, self.cfg.gap)?, true)
            }
            Err(e) => return Err(e),
        };
        if relaxed {
            log.events.push(Event {
                tau,
                k: None,
                kind: EventKind::DemandSlack {
                    kwh: plan.demand_slack_kwh,
                },
            });
        }
        let record = SolveRecord {
            stage: Stage::Swo,
            tau,
            k: None,
            status: plan.status,
            objective: plan.objective,
            gap: plan.gap,
            relaxed,
        };
        observer(&Progress {
            record: &record,
            elapsed: started.elapsed(),
        });
        log.solves.push(record);
        Ok((plan, re))
    }

    fn solve_rto(
        &mut self,
        tau: usize,
        k: usize,
        start: &[InitialCondition],
        log: &mut ExperimentLog,
        observer: &mut dyn FnMut(&Progress<'_>),
    ) -> Result<SoS> {
        let grid = self.cfg.grid;
        let n = grid.n_rto;
        let first = grid.global_index(tau, 0);
        let issue = first + k;
        let series = crate::environment::ActualSeries::new(self.actual.to_vec(), grid.delta_t)?;
        let fc = make_forecast(
            &series,
            issue,
            n - k,
            &self.cfg.forecast,
            self.forecast_seed,
        )?;
        let mut re: Vec<f64> = self.measurements[first..]
            .iter()
            .map(|m| m.re_available)
            .collect();
        re.extend(&fc.values);
        let history = FixedHistory::new(
            self.measurements[first..]
                .iter()
                .map(Measurement::record)
                .collect(),
        );

        if k == 0 {
            log.taus
                .last_mut()
                .expect("plan stored before RTO")
                .re_forecast_rto = re.clone();
        }
        let plan = &log.taus.last().expect("plan stored before RTO").plan;
        let plan_step = plan
            .step(tau)
            .ok_or_else(|| Error::Data(format!("plan has no step {tau}")))?;
        let problem = RtoProblem {
            spec: &self.cfg.system,
            grid: &grid,
            plan_step,
            tau,
            re_forecast: &re,
            history: &history,
            initial: Some(start),
            pin_states: true,
            slack_penalty: None,
        };
        let started = Instant::now();
        let (sos, relaxed) = match solve_rto(&problem, self.cfg.gap) {
            Ok(sos) => (sos, false),
            Err(e) if e.is_infeasible() => {
                warn!("{e}; re-solving with grid slack");
                (
                    relax_rto_on_infeasibility(
                        &problem,
                        self.cfg.relaxation_penalty,
                        self.cfg.gap,
                    )?,
                    true,
                )
            }
            Err(e) => return Err(e),
        };
        if relaxed {
            log.events.push(Event {
                tau,
                k: Some(k),
                kind: EventKind::GridSlack {
                    kwh: sos.grid_slack_kwh,
                },
            });
        }
        let record = SolveRecord {
            stage: Stage::Rto,
            tau,
            k: Some(k),
            status: sos.status,
            objective: sos.objective,
            gap: sos.gap,
            relaxed,
        };
        observer(&Progress {
            record: &record,
            elapsed: started.elapsed(),
        });
        log.solves.push(record);
        Ok(sos)
    }

    fn exchange(
        &mut self,
        plant: &mut dyn PlantLink,
        request: &PlantRequest,
        tau: usize,
        k: usize,
        log: &mut ExperimentLog,
    ) -> Result<Measurement> {
        match plant.exchange(request) {
            Err(Error::Transport(msg)) => {
                warn!("plant exchange failed ({msg}); retrying once");
                log.events.push(Event {
                    tau,
                    k: Some(k),
                    kind: EventKind::TransportRetry { message: msg },
                });
                plant.exchange(request)
            }
            other => other,
        }
    }

    fn advance(&mut self, m: &Measurement) {
        for (c, p) in self.conditions.iter_mut().zip(&m.resources) {
            if p.state == c.state {
                c.held_steps = c.held_steps.map(|h| h.saturating_add(1));
            } else {
                c.state = p.state;
                c.held_steps = Some(1);
            }
            c.p_input = p.p_input;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(state: u32, p: f64) -> ResourcePoint {
        ResourcePoint {
            state,
            p_input: p,
            p_output: 0.0,
        }
    }

    #[test]
    fn feedback_preserves_energy_and_takes_end_state() {
        let steps = (0..10)
            .map(|k| StepRecord {
                resources: vec![point(
                    if k < 5 { 1 } else { 2 },
                    if k < 5 { 4.0 } else { 0.0 },
                )],
                p_grid: if k < 5 { 4.0 } else { 0.0 },
                p_re_used: 0.0,
            })
            .collect();
        let h = feedback_to_swo(&Trajectory::new(steps), 10, 1);
        assert_eq!(h.steps.len(), 1);
        assert_eq!(h.steps[0].resources[0].p_input, 2.0);
        assert_eq!(h.steps[0].resources[0].state, 2);
        assert_eq!(h.steps[0].p_grid, 2.0);
    }

    #[test]
    fn feedback_of_constant_power() {
        let steps = vec![
            StepRecord {
                resources: vec![point(2, 2.4)],
                p_grid: 2.4,
                p_re_used: 0.0
            };
            10
        ];
        let h = feedback_to_swo(&Trajectory::new(steps), 10, 1);
        assert!((h.steps[0].resources[0].p_input - 2.4).abs() < 1e-15);
    }
}
