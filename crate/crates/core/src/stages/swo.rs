use log::debug;

use crate::error::{Error, Result};
use crate::milp::{
    encode_balance, encode_demand_over, encode_resource, solve, Direction, ModelHandle,
    SolveStatus, VarMap,
};
use crate::model::{
    check_with_delta, eval_piecewise, InitialCondition, Level, SystemSpec, TimeGrid,
};

use super::{extract_plan, initial_conditions, FixedHistory, Plan, PriceSeries};

/// Inputs of one SWO solve.
#[derive(Debug, Clone, Copy)]
pub struct SwoProblem<'a> {
    pub spec: &'a SystemSpec,
    pub grid: &'a TimeGrid,
    pub prices: &'a PriceSeries,
    /// Renewable power expected per coarse step, kW. Entries covered by
    /// the history are raised to the renewable power actually used there.
    pub re_forecast: &'a [f64],
    pub history: &'a FixedHistory,
    /// Condition before the first coarse step; `None` is a cold start.
    pub initial: Option<&'a [InitialCondition]>,
    /// When set, the demand row gets penalized slack in both directions,
    /// priced in EUR per kWh.
    pub demand_penalty: Option<f64>,
}

/// Minimum-cost plan over the full coarse horizon.
///
/// Steps in `history` are pinned; the demand target, if any, is reduced by
/// the energy already realized there and spread over the remaining steps.
pub fn build_and_solve_swo(
    spec: &SystemSpec,
    grid: &TimeGrid,
    prices: &PriceSeries,
    re_forecast: &[f64],
    history: &FixedHistory,
    gap: f64,
) -> Result<Plan> {
    solve_swo(
        &SwoProblem {
            spec,
            grid,
            prices,
            re_forecast,
            history,
            initial: None,
            demand_penalty: None,
        },
        gap,
    )
}

pub fn solve_swo(p: &SwoProblem<'_>, gap: f64) -> Result<Plan> {
    let spec = p.spec;
    let n = p.grid.n_swo;
    let delta = p.grid.delta(Level::Swo);
    if p.prices.len() != n || p.re_forecast.len() != n {
        return Err(Error::Data(format!(
            "SWO horizon has {n} steps but {} prices and {} forecast values",
            p.prices.len(),
            p.re_forecast.len()
        )));
    }
    p.history.check(spec, n)?;
    let initial = initial_conditions(spec, p.initial)?;
    let h = p.history.len();

    let mut model = ModelHandle::new();
    let mut vars = VarMap::default();
    for (r, res) in spec.resources.iter().enumerate() {
        vars.resources
            .push(encode_resource(&mut model, r, res, n, delta, &initial[r])?);
    }
    let re: Vec<f64> = (0..n)
        .map(|t| match p.history.steps.get(t) {
            Some(step) => p.re_forecast[t].max(step.p_re_used),
            None => p.re_forecast[t],
        })
        .collect();
    let balance = encode_balance(
        &mut model,
        &vars.resources,
        spec.grid_p_max,
        &re,
        spec.allow_curtailment,
    )?;

    for (t, step) in p.history.steps.iter().enumerate() {
        for (r, (point, res)) in step.resources.iter().zip(&spec.resources).enumerate() {
            let rv = &vars.resources[r];
            for (s, st) in res.states.iter().enumerate() {
                let on = f64::from(u8::from(st.id == point.state));
                model.fix(
                    format!("hist_r{r}_t{t}_state_{s}"),
                    rv.state_active[s][t],
                    on,
                );
            }
            model.fix(
                format!("hist_r{r}_t{t}_p_input"),
                rv.p_input[t],
                point.p_input,
            );
        }
        model.fix(format!("hist_t{t}_p_grid"), balance.p_grid[t], step.p_grid);
    }

    let mut objective: Vec<_> = (0..n)
        .map(|t| (balance.p_grid[t], p.prices.eur_per_mwh[t] * delta / 1000.0))
        .collect();

    let mut slack = None;
    if let Some(demand) = spec.demand {
        let done = p.history.demand_energy(delta, spec.demand_applies_to);
        let remaining = demand - done;
        if h < n {
            let row = encode_demand_over(
                &mut model,
                &vars.resources,
                h..n,
                remaining.max(0.0),
                delta,
                spec.demand_applies_to,
            )?;
            if let Some(penalty) = p.demand_penalty {
                let short = model.add_continuous("sys_demand_short", 0.0, f64::INFINITY);
                let over = model.add_continuous("sys_demand_over", 0.0, f64::INFINITY);
                model.constraints[row].terms.push((short, 1.0));
                model.constraints[row].terms.push((over, -1.0));
                objective.push((short, penalty));
                objective.push((over, penalty));
                slack = Some((short, over));
            } else if remaining < 0.0 {
                return Err(Error::Stage {
                    stage: "SWO",
                    status: SolveStatus::Infeasible,
                    detail: format!(
                        "demand {demand} kWh already exceeded by {:.6} kWh",
                        -remaining
                    ),
                });
            }
        } else if p.demand_penalty.is_none() && (remaining).abs() > 1e-6 {
            return Err(Error::Stage {
                stage: "SWO",
                status: SolveStatus::Infeasible,
                detail: format!("no free steps left to place {remaining:.6} kWh of demand"),
            });
        }
    }
    model.set_objective(Direction::Minimize, objective, 0.0);
    vars.balance = Some(balance);

    debug!(
        "SWO issue={h}: {} variables, {} binaries, {} rows",
        model.num_vars(),
        model.num_binaries(),
        model.num_constraints()
    );
    let solution = solve(&model, gap)?;
    if !solution.status.has_solution() {
        return Err(Error::Stage {
            stage: "SWO",
            status: solution.status,
            detail: format!("issue step {h}, {} resources", spec.resources.len()),
        });
    }
    let mut plan = extract_plan(&solution, &vars, spec, p.grid, &initial, h)?;

    // the pinned prefix repeats the history exactly, not the solver's
    // rendering of it
    for (t, step) in p.history.steps.iter().enumerate() {
        let planned = &mut plan.trajectory.steps[t];
        for (r, (dst, src)) in planned
            .resources
            .iter_mut()
            .zip(&step.resources)
            .enumerate()
        {
            let res = &spec.resources[r];
            dst.state = src.state;
            dst.p_input = src.p_input;
            dst.p_output = if res.is_operation(src.state) {
                eval_piecewise(src.p_input, &res.segment_table)?
            } else {
                0.0
            };
        }
        planned.p_grid = step.p_grid;
        planned.p_re_used = (planned.total_input() - step.p_grid).max(0.0);
    }
    let violations = check_with_delta(&plan.trajectory, spec, delta);
    if let Some(first) = violations.first() {
        return Err(Error::Extraction(format!(
            "plan with pinned history breaks a rule: {first}"
        )));
    }

    plan.cost_eur = plan
        .trajectory
        .steps
        .iter()
        .enumerate()
        .map(|(t, s)| p.prices.cost(t, s.p_grid, delta))
        .sum();
    if let Some((short, over)) = slack {
        plan.demand_slack_kwh = solution.value(short) - solution.value(over);
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ResourcePoint, StepRecord};
    use approx::assert_abs_diff_eq;

    fn one_resource(demand: Option<f64>) -> SystemSpec {
        let mut spec = SystemSpec::electrolyzers(1);
        spec.demand = demand;
        spec
    }

    fn grid() -> TimeGrid {
        TimeGrid::case_study()
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let spec = SystemSpec::electrolyzers(3);
        let plan = build_and_solve_swo(
            &spec,
            &grid(),
            &PriceSeries::constant(80.0, 10),
            &[0.0; 10],
            &FixedHistory::default(),
            1e-3,
        )
        .unwrap();
        assert_abs_diff_eq!(plan.cost_eur, 0.0, epsilon = 1e-12);
        assert!(plan
            .trajectory
            .steps
            .iter()
            .all(|s| s.resources.iter().all(|r| r.state == 0 && r.p_input == 0.0)));
    }

    #[test]
    fn full_load_demand_from_the_grid() {
        let spec = one_resource(Some(1.494 * 0.25 * 10.0));
        let plan = build_and_solve_swo(
            &spec,
            &grid(),
            &PriceSeries::constant(50.0, 10),
            &[0.0; 10],
            &FixedHistory::default(),
            1e-3,
        )
        .unwrap();
        // 50 EUR/MWh * 10 * 0.25 h * 2.4 kW / 1000
        assert_abs_diff_eq!(plan.cost_eur, 0.30, epsilon = 1e-9);
        assert_abs_diff_eq!(plan.objective, plan.cost_eur, epsilon = 1e-6);
        for s in &plan.trajectory.steps {
            assert_eq!(s.resources[0].p_input, 2.4);
            assert_abs_diff_eq!(s.resources[0].p_output, 1.494, epsilon = 1e-12);
        }
    }

    #[test]
    fn renewables_cover_full_load() {
        let spec = one_resource(Some(1.494 * 0.25 * 10.0));
        let plan = build_and_solve_swo(
            &spec,
            &grid(),
            &PriceSeries::constant(50.0, 10),
            &[2.4; 10],
            &FixedHistory::default(),
            1e-3,
        )
        .unwrap();
        assert_abs_diff_eq!(plan.cost_eur, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn length_mismatch_is_a_data_error() {
        let spec = one_resource(None);
        let err = build_and_solve_swo(
            &spec,
            &grid(),
            &PriceSeries::constant(50.0, 9),
            &[0.0; 10],
            &FixedHistory::default(),
            1e-3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }

    #[test]
    fn unreachable_demand_is_a_stage_error() {
        let spec = one_resource(Some(1.494 * 0.25 * 10.0 + 0.01));
        let err = build_and_solve_swo(
            &spec,
            &grid(),
            &PriceSeries::constant(50.0, 10),
            &[0.0; 10],
            &FixedHistory::default(),
            1e-3,
        )
        .unwrap_err();
        assert!(err.is_infeasible(), "{err}");
    }

    #[test]
    fn pinned_history_is_repeated_exactly() {
        let spec = one_resource(Some(2.0));
        let step = |state, p: f64| StepRecord {
            resources: vec![ResourcePoint {
                state,
                p_input: p,
                p_output: if state == 2 { 0.5 } else { 0.0 },
            }],
            p_grid: p,
            p_re_used: 0.0,
        };
        let history = FixedHistory::new(vec![step(2, 1.1), step(2, 1.7000000000000002)]);
        let plan = build_and_solve_swo(
            &spec,
            &grid(),
            &PriceSeries::constant(50.0, 10),
            &[0.0; 10],
            &history,
            1e-3,
        )
        .unwrap();
        assert_eq!(plan.issue, 2);
        for t in 0..2 {
            let got = &plan.trajectory.steps[t];
            assert_eq!(got.resources[0].state, history.steps[t].resources[0].state);
            assert_eq!(
                got.resources[0].p_input.to_bits(),
                history.steps[t].resources[0].p_input.to_bits()
            );
            assert_eq!(got.p_grid.to_bits(), history.steps[t].p_grid.to_bits());
        }
        // remaining demand: 2.0 minus the 2 * 0.5 * 0.25 kWh already realized
        let rest: f64 = plan.trajectory.steps[2..]
            .iter()
            .map(|s| s.total_output() * 0.25)
            .sum();
        assert_abs_diff_eq!(rest, 1.75, epsilon = 1e-6);
    }

    #[test]
    fn demand_slack_absorbs_an_overshoot() {
        let spec = one_resource(Some(0.1));
        let step = StepRecord {
            resources: vec![ResourcePoint {
                state: 2,
                p_input: 2.4,
                p_output: 1.494,
            }],
            p_grid: 2.4,
            p_re_used: 0.0,
        };
        let history = FixedHistory::new(vec![step]);
        let prices = PriceSeries::constant(50.0, 10);
        let strict = SwoProblem {
            spec: &spec,
            grid: &grid(),
            prices: &prices,
            re_forecast: &[0.0; 10],
            history: &history,
            initial: None,
            demand_penalty: None,
        };
        assert!(solve_swo(&strict, 1e-3).unwrap_err().is_infeasible());
        let relaxed = SwoProblem {
            demand_penalty: Some(10.0),
            ..strict
        };
        let plan = solve_swo(&relaxed, 1e-3).unwrap();
        // operation owes three more steps at minimum load
        let forced = 3.0 * 0.0388 * 0.25;
        assert_abs_diff_eq!(plan.demand_slack_kwh, -forced, epsilon = 1e-6);
    }
}
