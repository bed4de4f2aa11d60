use std::fmt;
use std::time::{Duration, Instant};

use highs::{HighsModelStatus, RowProblem, Sense};
use serde::{Deserialize, Serialize};

use super::model::{Direction, ModelHandle, VarKind};
use crate::error::{Error, Result};

/// Relative MIP gap used unless the caller asks otherwise.
pub const DEFAULT_GAP: f64 = 1e-3;
/// Distance from 0/1 below which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Row and bound feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-6;
const INTERNAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleWithinGap,
    Infeasible,
    Unbounded,
}

impl SolveStatus {
    pub fn has_solution(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleWithinGap)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleWithinGap => "feasible-within-gap",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    /// Objective value including the model's constant term.
    pub objective: Option<f64>,
    /// One value per declared variable; empty without a solution.
    pub values: Vec<f64>,
    /// Achieved relative gap between incumbent and best bound.
    pub gap: Option<f64>,
    pub wall_time: Duration,
}

impl Solution {
    pub fn value(&self, var: super::VarId) -> f64 {
        self.values[var.0]
    }

    /// Largest bound, row or integrality violation of the stored values.
    pub fn max_violation(&self, model: &ModelHandle) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let bounds = model.variables.iter().zip(&self.values).map(|(v, &x)| {
            let mut worst = (v.lower - x).max(x - v.upper).max(0.0);
            if v.kind == VarKind::Binary {
                worst = worst.max((x - x.round()).abs());
            }
            worst
        });
        let rows = model.constraints.iter().map(|c| c.violation(&self.values));
        bounds.chain(rows).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub gap: f64,
    pub time_limit: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap: DEFAULT_GAP,
            time_limit: None,
        }
    }
}

/// An exact MILP solver behind the [`ModelHandle`] contract.
pub trait MilpBackend {
    fn solve(&self, model: &ModelHandle, options: &SolveOptions) -> Result<Solution>;
}

/// Adapter for the HiGHS branch-and-cut solver, run single-threaded with a
/// fixed seed.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

impl MilpBackend for HighsBackend {
    fn solve(&self, model: &ModelHandle, options: &SolveOptions) -> Result<Solution> {
        model.validate()?;
        let objective = model
            .objective
            .as_ref()
            .ok_or_else(|| Error::InvalidModel("model has no objective".into()))?;
        if !(options.gap >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "gap {} must be non-negative",
                options.gap
            )));
        }

        let start = Instant::now();
        let mut costs = vec![0.0; model.num_vars()];
        for &(v, c) in &objective.terms {
            costs[v.0] += c;
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .variables
            .iter()
            .zip(&costs)
            .map(|(v, &c)| match v.kind {
                VarKind::Continuous => pb.add_column(c, v.lower..=v.upper),
                VarKind::Binary => pb.add_integer_column(c, v.lower..=v.upper),
            })
            .collect();
        for row in &model.constraints {
            let factors: Vec<_> = row.terms.iter().map(|&(v, c)| (cols[v.0], c)).collect();
            match row.sense {
                super::ConstraintSense::Le => pb.add_row(..=row.rhs, factors),
                super::ConstraintSense::Ge => pb.add_row(row.rhs.., factors),
                super::ConstraintSense::Eq => pb.add_row(row.rhs..=row.rhs, factors),
            }
        }
        let has_integers = model.num_binaries() > 0;
        let sense = match objective.direction {
            Direction::Minimize => Sense::Minimise,
            Direction::Maximize => Sense::Maximise,
        };

        let run = |presolve: &str| -> Result<highs::SolvedModel> {
            let mut m = pb.clone().optimise(sense);
            m.make_quiet();
            set_option(&mut m, "threads", 1)?;
            set_option(&mut m, "random_seed", 0)?;
            set_option(&mut m, "presolve", presolve)?;
            set_option(&mut m, "mip_rel_gap", options.gap)?;
            set_option(&mut m, "mip_abs_gap", 0.0)?;
            // well inside the contract tolerances, so rounding and the
            // trajectory checks downstream keep some slack
            set_option(&mut m, "mip_feasibility_tolerance", INTERNAL_TOL)?;
            set_option(&mut m, "primal_feasibility_tolerance", INTERNAL_TOL)?;
            if let Some(limit) = options.time_limit {
                set_option(&mut m, "time_limit", limit)?;
            }
            m.try_solve()
                .map_err(|status| Error::Solver(format!("HiGHS run failed: {status:?}")))
        };

        let mut solved = run("choose")?;
        if solved.status() == HighsModelStatus::UnboundedOrInfeasible {
            // presolve cannot tell the two apart; the simplex can
            solved = run("off")?;
        }

        let status = solved.status();
        let wall_time = start.elapsed();
        let empty = |status| Solution {
            status,
            objective: None,
            values: Vec::new(),
            gap: None,
            wall_time,
        };
        match status {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => {}
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => {
                return Ok(empty(SolveStatus::Infeasible))
            }
            HighsModelStatus::Unbounded => return Ok(empty(SolveStatus::Unbounded)),
            other => {
                return Err(Error::Solver(format!(
                    "HiGHS stopped with status {other:?}"
                )))
            }
        }

        let values = if model.num_vars() == 0 {
            Vec::new()
        } else {
            solved.get_solution().columns().to_vec()
        };
        let objective_value = objective.value(&values);
        let gap = if has_integers {
            let reported = solved.mip_gap();
            // HiGHS reports an infinite gap when the incumbent and bound are
            // both zero
            let bound = solved
                .double_info_value(c"mip_dual_bound")
                .unwrap_or(f64::NAN);
            if reported.is_finite() {
                reported
            } else if (bound - (objective_value - objective.constant)).abs() <= 1e-9 {
                0.0
            } else {
                reported
            }
        } else {
            0.0
        };
        let status = if gap <= 1e-12 {
            SolveStatus::Optimal
        } else {
            SolveStatus::FeasibleWithinGap
        };
        Ok(Solution {
            status,
            objective: Some(objective_value),
            values,
            gap: Some(gap),
            wall_time,
        })
    }
}

fn set_option<V: highs::HighsOptionValue>(
    model: &mut highs::Model,
    name: &str,
    value: V,
) -> Result<()> {
    model
        .try_set_option(name, value)
        .map_err(|e| Error::Solver(format!("option {name}: {e:?}")))
}

/// Solves `model` with the default backend and the given relative gap.
pub fn solve(model: &ModelHandle, gap: f64) -> Result<Solution> {
    HighsBackend.solve(
        model,
        &SolveOptions {
            gap,
            ..SolveOptions::default()
        },
    )
}
