use std::fmt;

use serde::{Deserialize, Serialize};

use super::piecewise::candidate_outputs;
use super::types::{
    InitialCondition, Level, ResourceSpec, StateId, SystemSpec, TimeGrid, Trajectory,
};

/// Absolute tolerance for power comparisons, kW.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryViolationCode {
    ShapeMismatch,
    UnknownState,
    NegativePower,
    ResourceBounds,
    StateInputBounds,
    IllegalTransition,
    MinHolding,
    MaxHolding,
    Ramp,
    OutputMismatch,
    Balance,
    GridLimit,
}

impl TrajectoryViolationCode {
    pub fn as_str(&self) -> &'static str {
        use TrajectoryViolationCode::*;
        match self {
            ShapeMismatch => "shape mismatch",
            UnknownState => "unknown state",
            NegativePower => "negative power",
            ResourceBounds => "resource bounds",
            StateInputBounds => "state input bounds",
            IllegalTransition => "illegal transition",
            MinHolding => "min holding",
            MaxHolding => "max holding",
            Ramp => "ramp",
            OutputMismatch => "output mismatch",
            Balance => "balance",
            GridLimit => "grid limit",
        }
    }
}

impl fmt::Display for TrajectoryViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryViolation {
    pub code: TrajectoryViolationCode,
    pub step: usize,
    pub resource: Option<usize>,
    pub detail: String,
}

impl fmt::Display for TrajectoryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}", self.step)?;
        if let Some(r) = self.resource {
            write!(f, " resource {r}")?;
        }
        write!(f, ": {}: {}", self.code, self.detail)
    }
}

/// Verifies a trajectory against the resource rules without any
/// optimization machinery.
///
/// Runs of a state that touch the end of the trajectory are truncated and
/// exempt from the minimum hold. A run at the start is checked against
/// `traj.initial` when present (including the carried dwell), and exempt
/// otherwise because its start is unknown.
pub fn check_trajectory(
    traj: &Trajectory,
    spec: &SystemSpec,
    grid: &TimeGrid,
    level: Level,
) -> Vec<TrajectoryViolation> {
    check_with_delta(traj, spec, grid.delta(level))
}

/// [`check_trajectory`] with an explicit step length in hours.
pub fn check_with_delta(
    traj: &Trajectory,
    spec: &SystemSpec,
    delta: f64,
) -> Vec<TrajectoryViolation> {
    use TrajectoryViolationCode::*;
    let mut out = Vec::new();
    let n_res = spec.resources.len();

    if let Some(init) = &traj.initial {
        if init.len() != n_res {
            out.push(violation(
                ShapeMismatch,
                0,
                None,
                format!("{} initial conditions for {n_res} resources", init.len()),
            ));
            return out;
        }
    }
    for (t, step) in traj.steps.iter().enumerate() {
        if step.resources.len() != n_res {
            out.push(violation(
                ShapeMismatch,
                t,
                None,
                format!(
                    "{} resource entries for {n_res} resources",
                    step.resources.len()
                ),
            ));
        }
    }
    if !out.is_empty() {
        return out;
    }

    for (t, step) in traj.steps.iter().enumerate() {
        if step.p_grid < -CHECK_TOL || step.p_re_used < -CHECK_TOL {
            out.push(violation(
                NegativePower,
                t,
                None,
                format!("grid {} re {}", step.p_grid, step.p_re_used),
            ));
        }
        if step.p_grid > spec.grid_p_max + CHECK_TOL {
            out.push(violation(
                GridLimit,
                t,
                None,
                format!("grid {} > {}", step.p_grid, spec.grid_p_max),
            ));
        }
        let residual = step.total_input() - step.p_grid - step.p_re_used;
        if residual.abs() > CHECK_TOL * (1 + n_res) as f64 {
            out.push(violation(
                Balance,
                t,
                None,
                format!("input - grid - re = {residual}"),
            ));
        }
    }

    for (r, res) in spec.resources.iter().enumerate() {
        let initial = traj.initial.as_ref().map(|i| i[r]);
        check_resource(traj, r, res, initial, delta, &mut out);
    }
    out
}

fn violation(
    code: TrajectoryViolationCode,
    step: usize,
    resource: Option<usize>,
    detail: String,
) -> TrajectoryViolation {
    TrajectoryViolation {
        code,
        step,
        resource,
        detail,
    }
}

fn check_resource(
    traj: &Trajectory,
    r: usize,
    res: &ResourceSpec,
    initial: Option<InitialCondition>,
    delta: f64,
    out: &mut Vec<TrajectoryViolation>,
) {
    use TrajectoryViolationCode::*;
    let points: Vec<_> = traj.steps.iter().map(|s| s.resources[r]).collect();
    let n = points.len();

    let mut known = true;
    for (t, p) in points.iter().enumerate() {
        let Some(state) = res.state(p.state) else {
            out.push(violation(
                UnknownState,
                t,
                Some(r),
                format!("state {}", p.state),
            ));
            known = false;
            continue;
        };
        if p.p_input < -CHECK_TOL || p.p_output < -CHECK_TOL {
            out.push(violation(
                NegativePower,
                t,
                Some(r),
                format!("input {} output {}", p.p_input, p.p_output),
            ));
        }
        if p.p_input < res.p_min - CHECK_TOL || p.p_input > res.p_max + CHECK_TOL {
            out.push(violation(
                ResourceBounds,
                t,
                Some(r),
                format!("input {} outside [{}, {}]", p.p_input, res.p_min, res.p_max),
            ));
        }
        if p.p_input < state.p_in_min - CHECK_TOL || p.p_input > state.p_in_max + CHECK_TOL {
            out.push(violation(
                StateInputBounds,
                t,
                Some(r),
                format!(
                    "input {} outside [{}, {}] of state {}",
                    p.p_input, state.p_in_min, state.p_in_max, state.name
                ),
            ));
        }
        if res.is_operation(p.state) {
            let ok = candidate_outputs(p.p_input, &res.segment_table, CHECK_TOL)
                .any(|y| (y - p.p_output).abs() <= CHECK_TOL);
            if !ok || p.p_output > state.p_out_max + CHECK_TOL {
                out.push(violation(
                    OutputMismatch,
                    t,
                    Some(r),
                    format!(
                        "output {} does not match input {} in operation",
                        p.p_output, p.p_input
                    ),
                ));
            }
        } else if p.p_output.abs() > CHECK_TOL {
            out.push(violation(
                OutputMismatch,
                t,
                Some(r),
                format!(
                    "output {} in non-operating state {}",
                    p.p_output, state.name
                ),
            ));
        }
    }
    if !known {
        return;
    }

    // transitions and ramps, including the step from the initial condition
    let mut prev: Option<(StateId, f64)> = initial.map(|i| (i.state, i.p_input));
    for (t, p) in points.iter().enumerate() {
        if let Some((prev_state, prev_input)) = prev {
            if !res.may_follow(prev_state, p.state) {
                out.push(violation(
                    IllegalTransition,
                    t,
                    Some(r),
                    format!("{} -> {} not permitted", prev_state, p.state),
                ));
            }
            let state = res.state(p.state).expect("checked above");
            let change = (p.p_input - prev_input).abs();
            if change > delta * state.ramp_max + CHECK_TOL {
                out.push(violation(
                    Ramp,
                    t,
                    Some(r),
                    format!("change {change} above {}", delta * state.ramp_max),
                ));
            }
            if change < delta * state.ramp_min - CHECK_TOL {
                out.push(violation(
                    Ramp,
                    t,
                    Some(r),
                    format!("change {change} below {}", delta * state.ramp_min),
                ));
            }
        }
        prev = Some((p.state, p.p_input));
    }

    // holding durations over maximal runs
    let mut start = 0;
    while start < n {
        let state_id = points[start].state;
        let mut end = start;
        while end + 1 < n && points[end + 1].state == state_id {
            end += 1;
        }
        let len = (end - start + 1) as u32;
        let state = res.state(state_id).expect("checked above");

        let (carried, start_known) = match (start, initial) {
            (0, Some(init)) if init.state == state_id => match init.held_steps {
                Some(h) => (h, true),
                None => (state.hold_min, true),
            },
            (0, Some(_)) => (0, true),
            (0, None) => (0, false),
            _ => (0, true),
        };
        let total = carried + len;
        let truncated = end + 1 == n;
        if start_known && !truncated && total < state.hold_min {
            out.push(violation(
                MinHolding,
                start,
                Some(r),
                format!(
                    "state {} held {total} steps, minimum {}",
                    state.name, state.hold_min
                ),
            ));
        }
        if let Some(max) = state.hold_max {
            if total > max {
                out.push(violation(
                    MaxHolding,
                    start,
                    Some(r),
                    format!("state {} held {total} steps, maximum {max}", state.name),
                ));
            }
        }
        start = end + 1;
    }
}
