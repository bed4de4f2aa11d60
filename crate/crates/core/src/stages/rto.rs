use log::debug;

use crate::error::{Error, Result};
use crate::milp::{
    encode_balance, encode_resource, solve, ConstraintSense, Direction, ModelHandle, SolveStatus,
    VarMap,
};
use crate::model::{check_with_delta, InitialCondition, Level, StepRecord, SystemSpec, TimeGrid};

use super::{extract_sos, initial_conditions, FixedHistory, Plan, SoS};

/// Inputs of one RTO solve over the fine steps of coarse step `tau`.
#[derive(Debug, Clone, Copy)]
pub struct RtoProblem<'a> {
    pub spec: &'a SystemSpec,
    pub grid: &'a TimeGrid,
    /// The plan's entry for `tau`; its grid power sets the energy budget.
    pub plan_step: &'a StepRecord,
    pub tau: usize,
    /// Renewable power expected per fine step of `tau`, kW.
    pub re_forecast: &'a [f64],
    /// Fine steps of `tau` already executed.
    pub history: &'a FixedHistory,
    /// Condition before the first fine step of `tau`.
    pub initial: Option<&'a [InitialCondition]>,
    /// Hold every free step in the state the plan gives for `tau`.
    pub pin_states: bool,
    /// When set, the grid-energy budget gets penalized slack in both
    /// directions, priced in kWh of output per kWh of slack.
    pub slack_penalty: Option<f64>,
}

/// Maximum-output setpoints for coarse step `tau`, drawing exactly the
/// plan's grid energy for that step.
///
/// Resource states stay at the plan's states for `tau`; executed fine
/// steps in `history` are pinned.
#[allow(clippy::too_many_arguments)]
pub fn build_and_solve_rto(
    spec: &SystemSpec,
    grid: &TimeGrid,
    plan: &Plan,
    tau: usize,
    re_forecast_short: &[f64],
    history: &FixedHistory,
    initial: &[InitialCondition],
    gap: f64,
) -> Result<SoS> {
    let plan_step = plan
        .step(tau)
        .ok_or_else(|| Error::Data(format!("plan has no step {tau}")))?;
    solve_rto(
        &RtoProblem {
            spec,
            grid,
            plan_step,
            tau,
            re_forecast: re_forecast_short,
            history,
            initial: Some(initial),
            pin_states: true,
            slack_penalty: None,
        },
        gap,
    )
}

pub fn solve_rto(p: &RtoProblem<'_>, gap: f64) -> Result<SoS> {
    let spec = p.spec;
    let n = p.grid.n_rto;
    let delta = p.grid.delta(Level::Rto);
    if p.re_forecast.len() != n {
        return Err(Error::Data(format!(
            "RTO horizon has {n} steps but {} forecast values",
            p.re_forecast.len()
        )));
    }
    if p.plan_step.resources.len() != spec.resources.len() {
        return Err(Error::Data(format!(
            "plan step lists {} resources, system has {}",
            p.plan_step.resources.len(),
            spec.resources.len()
        )));
    }
    p.history.check(spec, n)?;
    let initial = initial_conditions(spec, p.initial)?;
    let h = p.history.len();
    let budget = p.plan_step.p_grid * p.grid.delta(Level::Swo);

    let mut model = ModelHandle::new();
    let mut vars = VarMap::default();
    for (r, res) in spec.resources.iter().enumerate() {
        vars.resources
            .push(encode_resource(&mut model, r, res, n, delta, &initial[r])?);
    }
    let re: Vec<f64> = (0..n)
        .map(|k| match p.history.steps.get(k) {
            Some(step) => p.re_forecast[k].max(step.p_re_used),
            None => p.re_forecast[k],
        })
        .collect();
    let balance = encode_balance(
        &mut model,
        &vars.resources,
        spec.grid_p_max,
        &re,
        spec.allow_curtailment,
    )?;

    for (k, step) in p.history.steps.iter().enumerate() {
        for (r, (point, res)) in step.resources.iter().zip(&spec.resources).enumerate() {
            let rv = &vars.resources[r];
            for (s, st) in res.states.iter().enumerate() {
                let on = f64::from(u8::from(st.id == point.state));
                model.fix(
                    format!("hist_r{r}_t{k}_state_{s}"),
                    rv.state_active[s][k],
                    on,
                );
            }
            model.fix(
                format!("hist_r{r}_t{k}_p_input"),
                rv.p_input[k],
                point.p_input,
            );
        }
        model.fix(format!("hist_t{k}_p_grid"), balance.p_grid[k], step.p_grid);
    }
    if p.pin_states {
        for (r, (point, res)) in p
            .plan_step
            .resources
            .iter()
            .zip(&spec.resources)
            .enumerate()
        {
            let s = res.state_index(point.state).ok_or_else(|| {
                Error::Data(format!(
                    "plan state {} unknown to resource {r}",
                    point.state
                ))
            })?;
            for k in h..n {
                model.fix(
                    format!("pin_r{r}_t{k}_state"),
                    vars.resources[r].state_active[s][k],
                    1.0,
                );
            }
        }
    }

    let terms: Vec<_> = balance.p_grid.iter().map(|&v| (v, delta)).collect();
    let row = model.add_constraint("sys_grid_budget", terms, ConstraintSense::Eq, budget);
    let mut objective: Vec<_> = vars
        .resources
        .iter()
        .flat_map(|rv| rv.p_output.iter().map(|&v| (v, delta)))
        .collect();
    let mut slack = None;
    if let Some(penalty) = p.slack_penalty {
        let over = model.add_continuous("sys_budget_over", 0.0, f64::INFINITY);
        let under = model.add_continuous("sys_budget_under", 0.0, f64::INFINITY);
        model.constraints[row].terms.push((over, -1.0));
        model.constraints[row].terms.push((under, 1.0));
        objective.push((over, -penalty));
        objective.push((under, -penalty));
        slack = Some((over, under));
    }
    model.set_objective(Direction::Maximize, objective, 0.0);
    vars.balance = Some(balance);

    debug!(
        "RTO tau={} k={h}: {} variables, {} binaries, {} rows",
        p.tau,
        model.num_vars(),
        model.num_binaries(),
        model.num_constraints()
    );
    let solution = solve(&model, gap)?;
    if !solution.status.has_solution() {
        let detail = if slack.is_some() {
            format!(
                "tau={} k={h}: no setpoints even with the grid budget relaxed",
                p.tau
            )
        } else {
            format!(
                "tau={} k={h}: the grid-energy coupling to the plan ({budget:.6} kWh) is binding; \
                 no setpoints draw exactly that energy within the state bounds",
                p.tau
            )
        };
        return Err(Error::Stage {
            stage: "RTO",
            status: solution.status,
            detail,
        });
    }
    if solution.status == SolveStatus::Unbounded {
        return Err(Error::Solver("RTO model unbounded".into()));
    }

    let mut sos = extract_sos(&solution, &vars, spec, p.grid, &initial, p.tau, h)?;
    for (k, step) in p.history.steps.iter().enumerate() {
        let dst = &mut sos.trajectory.steps[k];
        dst.resources.clone_from(&step.resources);
        dst.p_grid = step.p_grid;
        dst.p_re_used = step.p_re_used;
    }
    if h > 0 {
        let violations = check_with_delta(&sos.trajectory, spec, delta);
        if let Some(first) = violations.first() {
            return Err(Error::Extraction(format!(
                "setpoints with pinned history break a rule: {first}"
            )));
        }
    }
    sos.budget_kwh = budget;
    if let Some((over, under)) = slack {
        sos.grid_slack_kwh = solution.value(over) - solution.value(under);
    }
    Ok(sos)
}
