use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::Measurement;
use crate::error::{Error, Result};
use crate::milp::SolveStatus;
use crate::model::{TimeGrid, Trajectory};
use crate::stages::{write_plan_csv, write_sos_csv, Plan, PriceSeries, SoS, TRAJECTORY_CSV_HEADER};

/// File name of the serialized log inside an output directory.
pub const LOG_FILE: &str = "experiment_log.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Swo,
    Rto,
}

impl Stage {
    pub fn label(&self) -> &'static str {
        match self {
            Stage::Swo => "SWO",
            Stage::Rto => "RTO",
        }
    }
}

/// Outcome of one stage solve. Wall times are left out so that logs of
/// identical runs compare equal byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub stage: Stage,
    pub tau: usize,
    /// Fine step within `tau` (RTO only).
    pub k: Option<usize>,
    pub status: SolveStatus,
    pub objective: f64,
    pub gap: Option<f64>,
    /// Solved with penalized slack after the strict model was infeasible.
    pub relaxed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EventKind {
    /// The RTO drew `kwh` more grid energy than budgeted (negative: less).
    GridSlack { kwh: f64 },
    /// The SWO missed the remaining demand by `kwh` (negative: exceeded).
    DemandSlack { kwh: f64 },
    /// A plant exchange failed once and was retried.
    TransportRetry { message: String },
    /// The plant kept a resource's state instead of the commanded one.
    Rejected { resource: usize },
    /// The plant moved a commanded input into bounds.
    Clipped { resource: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tau: usize,
    pub k: Option<usize>,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Everything produced while the loop sat at one coarse step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauLog {
    pub tau: usize,
    /// Coarse-step forecast the SWO used, kW (entries before `tau` are the
    /// realized averages).
    pub re_forecast_swo: Vec<f64>,
    /// Fine-step forecast issued at the first fine step of `tau`, kW.
    pub re_forecast_rto: Vec<f64>,
    pub plan: Plan,
    /// One per fine step, issued before that step was executed.
    pub sos: Vec<SoS>,
    pub measurements: Vec<Measurement>,
    /// Output energy for `tau` in the first plan, kWh.
    pub planned_initial_kwh: f64,
    /// Output energy for `tau` in the plan being executed, kWh.
    pub planned_active_kwh: f64,
    pub realized_kwh: f64,
    /// `100 (realized - planned) / planned` against the first plan;
    /// `None` when nothing was planned.
    pub deviation_pct: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    Infeasible,
    Transport,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn from_error(e: &Error) -> Self {
        let kind = match e {
            _ if e.is_infeasible() => FailureKind::Infeasible,
            Error::Transport(_) => FailureKind::Transport,
            _ => FailureKind::Internal,
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

/// Record of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentLog {
    pub seed: u64,
    pub grid: TimeGrid,
    pub prices: PriceSeries,
    /// Actual renewable power per fine step, kW.
    pub actual_re: Vec<f64>,
    pub taus: Vec<TauLog>,
    pub solves: Vec<SolveRecord>,
    pub events: Vec<Event>,
    /// Executed fine steps.
    pub realized_rto: Trajectory,
    /// Executed fine steps averaged per coarse step, as fed back to the SWO.
    pub realized_swo: Trajectory,
    pub failure: Option<Failure>,
}

impl ExperimentLog {
    pub fn completed(&self) -> bool {
        self.failure.is_none() && self.taus.len() == self.grid.n_swo
    }

    pub fn count(&self, stage: Stage) -> usize {
        self.solves.iter().filter(|s| s.stage == stage).count()
    }

    /// Coarse steps with a grid-slack event.
    pub fn slack_taus(&self) -> Vec<usize> {
        let mut v: Vec<_> = self
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::GridSlack { .. }))
            .map(|e| e.tau)
            .collect();
        v.dedup();
        v
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Writes the log plus `plans.csv`, `sos.csv`, `realized_rto.csv` and
    /// `realized_swo.csv` into `dir`.
    pub fn write_artifacts(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(LOG_FILE), self.to_json()?)?;

        let mut plans = Vec::new();
        let mut sos = Vec::new();
        for t in &self.taus {
            let mut buf = Vec::new();
            write_plan_csv(&mut buf, &t.plan)?;
            append_with_prefix(&mut plans, &buf, "issue", &t.plan.issue.to_string());
            for s in &t.sos {
                let mut buf = Vec::new();
                write_sos_csv(&mut buf, s)?;
                append_with_prefix(&mut sos, &buf, "issue", &s.issue.to_string());
            }
        }
        fs::write(dir.join("plans.csv"), plans)?;
        fs::write(dir.join("sos.csv"), sos)?;

        for (name, traj) in [
            ("realized_rto.csv", &self.realized_rto),
            ("realized_swo.csv", &self.realized_swo),
        ] {
            let plan = Plan {
                issue: 0,
                status: SolveStatus::Optimal,
                gap: None,
                objective: 0.0,
                cost_eur: 0.0,
                demand_slack_kwh: 0.0,
                trajectory: traj.clone(),
            };
            let mut buf = Vec::new();
            write_plan_csv(&mut buf, &plan)?;
            fs::write(dir.join(name), buf)?;
        }
        Ok(())
    }
}

/// Appends CSV `chunk` to `out` with an extra leading column; the header is
/// written once.
fn append_with_prefix(out: &mut Vec<u8>, chunk: &[u8], column: &str, value: &str) {
    let text = String::from_utf8_lossy(chunk);
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if out.is_empty() {
        debug_assert_eq!(header, TRAJECTORY_CSV_HEADER.join(","));
        out.extend_from_slice(format!("{column},{header}\n").as_bytes());
    }
    for line in lines {
        out.extend_from_slice(format!("{value},{line}\n").as_bytes());
    }
}
