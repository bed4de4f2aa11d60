//! The two optimization stages built from the shared encodings.
//!
//! The site-wide stage (SWO) covers the whole horizon at the coarse step
//! and minimizes the cost of grid energy. The real-time stage (RTO) covers
//! one coarse step at the fine resolution, inherits that step's grid
//! energy from the plan as a hard budget and maximizes output.

mod export;
mod extract;
mod rto;
mod swo;

pub use export::{write_plan_csv, write_sos_csv, TRAJECTORY_CSV_HEADER};
pub use extract::{extract_plan, extract_sos, extract_trajectory};
pub use rto::{build_and_solve_rto, solve_rto, RtoProblem};
pub use swo::{build_and_solve_swo, solve_swo, SwoProblem};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::SolveStatus;
use crate::model::{DemandTarget, InitialCondition, StepRecord, SystemSpec, Trajectory};

/// Intra-day electricity price per coarse step, EUR/MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub eur_per_mwh: Vec<f64>,
}

impl PriceSeries {
    pub fn new(eur_per_mwh: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = eur_per_mwh.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!("price at step {i} is {v}")));
        }
        Ok(PriceSeries { eur_per_mwh })
    }

    pub fn constant(value: f64, n: usize) -> Self {
        PriceSeries {
            eur_per_mwh: vec![value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.eur_per_mwh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eur_per_mwh.is_empty()
    }

    /// Cost in EUR of drawing `p_grid` kW for `delta` hours at step `t`.
    pub fn cost(&self, t: usize, p_grid: f64, delta: f64) -> f64 {
        self.eur_per_mwh[t] * p_grid * delta / 1000.0
    }
}

/// Realized steps pinned at the start of a horizon by equality rows on
/// states, per-resource inputs and grid power.
///
/// Outputs are carried for bookkeeping (the remaining demand), not pinned.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FixedHistory {
    pub steps: Vec<StepRecord>,
}

impl FixedHistory {
    pub fn new(steps: Vec<StepRecord>) -> Self {
        FixedHistory { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Energy counted by a demand target over the pinned steps.
    pub fn demand_energy(&self, delta: f64, target: DemandTarget) -> f64 {
        self.steps
            .iter()
            .map(|s| match target {
                DemandTarget::Output => s.total_output(),
                DemandTarget::Input => s.total_input(),
            })
            .sum::<f64>()
            * delta
    }

    pub(crate) fn check(&self, spec: &SystemSpec, n_steps: usize) -> Result<()> {
        if self.steps.len() > n_steps {
            return Err(Error::Data(format!(
                "history has {} steps, horizon only {n_steps}",
                self.steps.len()
            )));
        }
        for (t, step) in self.steps.iter().enumerate() {
            if step.resources.len() != spec.resources.len() {
                return Err(Error::Data(format!(
                    "history step {t} lists {} resources, system has {}",
                    step.resources.len(),
                    spec.resources.len()
                )));
            }
            for (r, (point, res)) in step.resources.iter().zip(&spec.resources).enumerate() {
                if res.state_index(point.state).is_none() {
                    return Err(Error::Data(format!(
                        "history step {t}, resource {r}: unknown state {}",
                        point.state
                    )));
                }
                if !(point.p_input >= res.p_min - 1e-9 && point.p_input <= res.p_max + 1e-9) {
                    return Err(Error::Data(format!(
                        "history step {t}, resource {r}: input {} outside [{}, {}]",
                        point.p_input, res.p_min, res.p_max
                    )));
                }
            }
            if !(step.p_grid >= -1e-9 && step.p_grid <= spec.grid_p_max + 1e-9) {
                return Err(Error::Data(format!(
                    "history step {t}: grid power {} outside [0, {}]",
                    step.p_grid, spec.grid_p_max
                )));
            }
        }
        Ok(())
    }
}

/// Result of one SWO solve over the full coarse horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// First free coarse step when the plan was produced.
    pub issue: usize,
    pub status: SolveStatus,
    pub gap: Option<f64>,
    /// Solver objective, EUR, including any demand penalty.
    pub objective: f64,
    /// Grid cost recomputed from the plan's grid powers, EUR.
    pub cost_eur: f64,
    /// Output energy the demand row could not place, kWh (signed: positive
    /// means short of the target). Zero unless the stage was relaxed.
    pub demand_slack_kwh: f64,
    pub trajectory: Trajectory,
}

impl Plan {
    pub fn step(&self, tau: usize) -> Option<&StepRecord> {
        self.trajectory.steps.get(tau)
    }

    /// Output energy planned for coarse step `tau`, kWh.
    pub fn output_energy(&self, tau: usize, delta_tau: f64) -> f64 {
        self.step(tau).map_or(0.0, |s| s.total_output() * delta_tau)
    }

    pub fn grid_energy(&self, tau: usize, delta_tau: f64) -> f64 {
        self.step(tau).map_or(0.0, |s| s.p_grid * delta_tau)
    }
}

/// Set of setpoints: one RTO solve over the fine steps of one coarse step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoS {
    /// Parent coarse step.
    pub tau: usize,
    /// First free fine step within `tau` when the setpoints were produced.
    pub issue: usize,
    pub status: SolveStatus,
    pub gap: Option<f64>,
    /// Solver objective, kWh of output, minus any slack penalty.
    pub objective: f64,
    /// Grid energy inherited from the plan, kWh.
    pub budget_kwh: f64,
    /// Grid energy drawn beyond the budget (negative: left unused), kWh.
    /// Zero unless the stage was relaxed.
    pub grid_slack_kwh: f64,
    pub trajectory: Trajectory,
}

impl SoS {
    pub fn output_energy(&self, delta_t: f64) -> f64 {
        self.trajectory.output_energy(delta_t)
    }

    pub fn grid_energy(&self, delta_t: f64) -> f64 {
        self.trajectory.steps.iter().map(|s| s.p_grid).sum::<f64>() * delta_t
    }
}

pub(crate) fn initial_conditions(
    spec: &SystemSpec,
    given: Option<&[InitialCondition]>,
) -> Result<Vec<InitialCondition>> {
    match given {
        None => Ok(spec
            .resources
            .iter()
            .map(InitialCondition::cold_start)
            .collect()),
        Some(init) if init.len() == spec.resources.len() => Ok(init.to_vec()),
        Some(init) => Err(Error::Data(format!(
            "{} initial conditions for {} resources",
            init.len(),
            spec.resources.len()
        ))),
    }
}
