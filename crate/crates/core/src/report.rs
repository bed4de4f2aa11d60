//! Metrics over a finished experiment and the CSV series behind the
//! figures: summed inputs, efficiency, renewable forecast against actual,
//! and per-step deviation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{efficiency, Level, StepRecord, Trajectory};
use crate::orchestrator::{EventKind, ExperimentLog};

/// Planned against realized output for one coarse step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMetrics {
    pub tau: usize,
    /// Output energy in the first plan, kWh.
    pub planned_kwh: f64,
    pub realized_kwh: f64,
    /// `None` when nothing was planned.
    pub deviation_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub taus: Vec<TauMetrics>,
    /// Over the coarse steps with a defined deviation; `None` if there are
    /// none.
    pub mean_deviation_pct: Option<f64>,
    pub min_deviation_pct: Option<f64>,
    pub max_deviation_pct: Option<f64>,
    /// Output over input energy of the first plan; `None` when it draws no
    /// input.
    pub efficiency_planned: Option<f64>,
    pub efficiency_realized: Option<f64>,
    pub planned_output_kwh: f64,
    pub realized_output_kwh: f64,
    /// Realized grid energy priced per coarse step, EUR.
    pub grid_cost_eur: f64,
    pub planned_cost_eur: f64,
    pub grid_kwh: f64,
    pub re_used_kwh: f64,
    pub re_available_kwh: f64,
    pub grid_slack_events: usize,
    pub demand_slack_events: usize,
}

/// Computes the report for a completed log.
pub fn compute_metrics(log: &ExperimentLog) -> Result<MetricsReport> {
    if !log.completed() {
        return Err(Error::Report(match &log.failure {
            Some(f) => format!("log is incomplete: run failed ({})", f.message),
            None => format!(
                "log is incomplete: {} of {} coarse steps",
                log.taus.len(),
                log.grid.n_swo
            ),
        }));
    }
    let grid = &log.grid;
    let dt = grid.delta(Level::Rto);
    let first = &log.taus[0].plan;

    let taus: Vec<TauMetrics> = log
        .taus
        .iter()
        .map(|t| TauMetrics {
            tau: t.tau,
            planned_kwh: t.planned_initial_kwh,
            realized_kwh: t.realized_kwh,
            deviation_pct: t.deviation_pct,
        })
        .collect();
    let defined: Vec<f64> = taus.iter().filter_map(|t| t.deviation_pct).collect();
    let mean_deviation_pct =
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let min_deviation_pct = defined.iter().copied().reduce(f64::min);
    let max_deviation_pct = defined.iter().copied().reduce(f64::max);

    let grid_cost_eur = log
        .realized_rto
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| log.prices.cost(grid.split_index(i).0, s.p_grid, dt))
        .sum();
    let count = |f: fn(&EventKind) -> bool| log.events.iter().filter(|e| f(&e.kind)).count();

    Ok(MetricsReport {
        mean_deviation_pct,
        min_deviation_pct,
        max_deviation_pct,
        efficiency_planned: efficiency(&first.trajectory).ok(),
        efficiency_realized: efficiency(&log.realized_rto).ok(),
        planned_output_kwh: first.trajectory.output_energy(grid.delta(Level::Swo)),
        realized_output_kwh: log.realized_rto.output_energy(dt),
        grid_cost_eur,
        planned_cost_eur: first.cost_eur,
        grid_kwh: log.realized_rto.steps.iter().map(|s| s.p_grid).sum::<f64>() * dt,
        re_used_kwh: log
            .realized_rto
            .steps
            .iter()
            .map(|s| s.p_re_used)
            .sum::<f64>()
            * dt,
        re_available_kwh: log.actual_re.iter().sum::<f64>() * dt,
        grid_slack_events: count(|k| matches!(k, EventKind::GridSlack { .. })),
        demand_slack_events: count(|k| matches!(k, EventKind::DemandSlack { .. })),
        taus,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// A few lines for a terminal.
    pub fn summary(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:+.2}%"));
        let eff =
            |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{:.2}%", 100.0 * v));
        format!(
            "output planned {:.4} kWh, realized {:.4} kWh\n\
             deviation mean {} (min {}, max {})\n\
             efficiency planned {}, realized {}\n\
             grid {:.4} kWh costing {:.4} EUR; renewable used {:.4} of {:.4} kWh",
            self.planned_output_kwh,
            self.realized_output_kwh,
            pct(self.mean_deviation_pct),
            pct(self.min_deviation_pct),
            pct(self.max_deviation_pct),
            eff(self.efficiency_planned),
            eff(self.efficiency_realized),
            self.grid_kwh,
            self.grid_cost_eur,
            self.re_used_kwh,
            self.re_available_kwh,
        )
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn step_efficiency(steps: &[StepRecord]) -> Option<f64> {
    efficiency(&Trajectory::new(steps.to_vec())).ok()
}

/// Writes `report.json` and the figure series into `dir`:
///
/// - `sum_input.csv`: per coarse step, first-plan and realized summed
///   input and grid power next to the renewable forecast
/// - `efficiency.csv`: per coarse step, planned and realized efficiency
/// - `re_forecast.csv`: per fine step, the renewable forecasts against the
///   actual and used power
/// - `deviation.csv`: per coarse step, planned and realized output
///
/// Undefined values are left empty.
pub fn write_report(
    log: &ExperimentLog,
    report: &MetricsReport,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    let grid = &log.grid;
    let first = &log.taus[0];
    let n_rto = grid.n_rto;

    let mut w = csv::Writer::from_path(dir.join("sum_input.csv"))?;
    w.write_record([
        "tau",
        "time_h",
        "planned_input_kw",
        "planned_grid_kw",
        "re_forecast_kw",
        "realized_input_kw",
        "realized_grid_kw",
    ])?;
    for (tau, planned) in first.plan.trajectory.steps.iter().enumerate() {
        let realized = &log.realized_swo.steps[tau];
        w.write_record([
            tau.to_string(),
            (tau as f64 * grid.delta_tau).to_string(),
            planned.total_input().to_string(),
            planned.p_grid.to_string(),
            first.re_forecast_swo[tau].to_string(),
            realized.total_input().to_string(),
            realized.p_grid.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("efficiency.csv"))?;
    w.write_record(["tau", "planned_efficiency", "realized_efficiency"])?;
    for tau in 0..grid.n_swo {
        let planned = step_efficiency(&first.plan.trajectory.steps[tau..tau + 1]);
        let realized = step_efficiency(&log.realized_rto.steps[tau * n_rto..(tau + 1) * n_rto]);
        w.write_record([tau.to_string(), opt(planned), opt(realized)])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("re_forecast.csv"))?;
    w.write_record([
        "step",
        "time_h",
        "tau",
        "swo_forecast_kw",
        "rto_forecast_kw",
        "actual_kw",
        "used_kw",
    ])?;
    for (i, step) in log.realized_rto.steps.iter().enumerate() {
        let (tau, k) = grid.split_index(i);
        w.write_record([
            i.to_string(),
            (i as f64 * grid.delta_t).to_string(),
            tau.to_string(),
            first.re_forecast_swo[tau].to_string(),
            log.taus[tau].re_forecast_rto[k].to_string(),
            log.actual_re[i].to_string(),
            step.p_re_used.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("deviation.csv"))?;
    w.write_record(["tau", "planned_kwh", "realized_kwh", "deviation_pct"])?;
    for t in &report.taus {
        w.write_record([
            t.tau.to_string(),
            t.planned_kwh.to_string(),
            t.realized_kwh.to_string(),
            opt(t.deviation_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}
