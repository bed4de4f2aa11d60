use crate::error::{Error, Result};
use crate::milp::{Solution, VarId, VarMap, INTEGRALITY_TOL};
use crate::model::{
    check_with_delta, InitialCondition, Level, ResourcePoint, StepRecord, SystemSpec, TimeGrid,
    Trajectory,
};

use super::{Plan, SoS};

/// Below this magnitude extracted powers are written as exact zeros.
const ZERO_SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    if v.abs() < ZERO_SNAP {
        0.0
    } else {
        v
    }
}

fn binary(solution: &Solution, v: VarId, what: impl Fn() -> String) -> Result<bool> {
    let x = solution.value(v);
    let r = x.round();
    if (x - r).abs() > INTEGRALITY_TOL || !(r == 0.0 || r == 1.0) {
        return Err(Error::Extraction(format!("{} is fractional: {x}", what())));
    }
    Ok(r == 1.0)
}

/// Reads a trajectory out of a solved model.
///
/// Binaries are rounded first (a value further than the integrality
/// tolerance from 0 or 1 is an error). Outputs are recomputed from the
/// rounded segment choice, so they match the piecewise map exactly. The
/// result is checked against the state rules; any violation means the
/// rounding produced something the model did not and is reported as an
/// extraction error.
pub fn extract_trajectory(
    solution: &Solution,
    vars: &VarMap,
    spec: &SystemSpec,
    delta: f64,
    initial: &[InitialCondition],
) -> Result<Trajectory> {
    if !solution.status.has_solution() {
        return Err(Error::Extraction(format!(
            "solution status is {}",
            solution.status
        )));
    }
    if vars.resources.len() != spec.resources.len() {
        return Err(Error::Extraction(format!(
            "variable map has {} resources, system {}",
            vars.resources.len(),
            spec.resources.len()
        )));
    }
    let balance = vars
        .balance
        .as_ref()
        .ok_or_else(|| Error::Extraction("variable map has no balance variables".into()))?;

    let n = vars.n_steps();
    let mut steps = Vec::with_capacity(n);
    for t in 0..n {
        let mut points = Vec::with_capacity(spec.resources.len());
        for (r, (res, rv)) in spec.resources.iter().zip(&vars.resources).enumerate() {
            let mut active = Vec::new();
            for (s, st) in res.states.iter().enumerate() {
                let on = binary(solution, rv.state_active[s][t], || {
                    format!("state {} of resource {r} at step {t}", st.id)
                })?;
                if on {
                    active.push(st.id);
                }
            }
            let state = match active.as_slice() {
                [one] => *one,
                other => {
                    return Err(Error::Extraction(format!(
                        "resource {r} at step {t} has {} active states",
                        other.len()
                    )))
                }
            };
            let mut segment = None;
            for k in 0..res.segment_table.len() {
                let on = binary(solution, rv.seg_active[k][t], || {
                    format!("segment {k} of resource {r} at step {t}")
                })?;
                if on && segment.replace(k).is_some() {
                    return Err(Error::Extraction(format!(
                        "resource {r} at step {t} has several active segments"
                    )));
                }
            }

            let p_input = snap(solution.value(rv.p_input[t]))
                .max(res.p_min)
                .min(res.p_max);
            let p_output = if res.is_operation(state) {
                let k = segment.ok_or_else(|| {
                    Error::Extraction(format!(
                        "resource {r} operates at step {t} without a segment"
                    ))
                })?;
                let seg = &res.segment_table.segments[k];
                snap(seg.eval(p_input))
            } else {
                if segment.is_some() {
                    return Err(Error::Extraction(format!(
                        "resource {r} has a segment at step {t} outside operation"
                    )));
                }
                0.0
            };
            points.push(ResourcePoint {
                state,
                p_input,
                p_output,
            });
        }
        steps.push(StepRecord {
            resources: points,
            p_grid: snap(solution.value(balance.p_grid[t])).max(0.0),
            p_re_used: snap(solution.value(balance.p_re_used[t])).max(0.0),
        });
    }

    let traj = Trajectory::new(steps).with_initial(initial.to_vec());
    let violations = check_with_delta(&traj, spec, delta);
    if let Some(first) = violations.first() {
        return Err(Error::Extraction(format!(
            "{} rule violation(s) after rounding, first: {first}",
            violations.len()
        )));
    }
    Ok(traj)
}

/// [`extract_trajectory`] at the coarse step, wrapped as a [`Plan`].
pub fn extract_plan(
    solution: &Solution,
    vars: &VarMap,
    spec: &SystemSpec,
    grid: &TimeGrid,
    initial: &[InitialCondition],
    issue: usize,
) -> Result<Plan> {
    let trajectory = extract_trajectory(solution, vars, spec, grid.delta(Level::Swo), initial)?;
    Ok(Plan {
        issue,
        status: solution.status,
        gap: solution.gap,
        objective: solution.objective.unwrap_or(f64::NAN),
        cost_eur: 0.0,
        demand_slack_kwh: 0.0,
        trajectory,
    })
}

/// [`extract_trajectory`] at the fine step, wrapped as a [`SoS`].
pub fn extract_sos(
    solution: &Solution,
    vars: &VarMap,
    spec: &SystemSpec,
    grid: &TimeGrid,
    initial: &[InitialCondition],
    tau: usize,
    issue: usize,
) -> Result<SoS> {
    let trajectory = extract_trajectory(solution, vars, spec, grid.delta(Level::Rto), initial)?;
    Ok(SoS {
        tau,
        issue,
        status: solution.status,
        gap: solution.gap,
        objective: solution.objective.unwrap_or(f64::NAN),
        budget_kwh: 0.0,
        grid_slack_kwh: 0.0,
        trajectory,
    })
}
