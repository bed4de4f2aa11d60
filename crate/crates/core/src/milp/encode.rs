use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::model::{ConstraintSense, ModelHandle, VarId};
use crate::error::{Error, Result};
use crate::model::{DemandTarget, InitialCondition, ResourceSpec};

use ConstraintSense::{Eq, Ge, Le};

/// Variable roles used in names and lookups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    /// Total input power `P_t`.
    PInput,
    /// Input drawn while not in the operation state.
    PInputIdle,
    /// Input carried by segment `k`.
    PInputSeg(usize),
    /// Segment `k` selected.
    SegActive(usize),
    /// State with the given position in the resource's state list.
    StateActive(usize),
    POutput,
    /// `|P_t - P_{t-1}|` bound variable.
    RampAbs,
    /// Direction of the change, only with a positive minimum ramp.
    RampDir,
    PGrid,
    PReUsed,
}

impl Role {
    pub fn label(&self) -> String {
        match self {
            Role::PInput => "p_input".into(),
            Role::PInputIdle => "p_input_idle".into(),
            Role::PInputSeg(k) => format!("p_input_seg_{k}"),
            Role::SegActive(k) => format!("seg_active_{k}"),
            Role::StateActive(s) => format!("state_active_{s}"),
            Role::POutput => "p_output".into(),
            Role::RampAbs => "ramp_abs".into(),
            Role::RampDir => "ramp_dir".into(),
            Role::PGrid => "p_grid".into(),
            Role::PReUsed => "p_re_used".into(),
        }
    }
}

/// Variables of one resource, indexed `[t]` or `[k][t]` / `[s][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceVars {
    pub p_input: Vec<VarId>,
    pub p_input_idle: Vec<VarId>,
    pub p_input_seg: Vec<Vec<VarId>>,
    pub seg_active: Vec<Vec<VarId>>,
    pub state_active: Vec<Vec<VarId>>,
    pub p_output: Vec<VarId>,
    pub ramp_abs: Vec<VarId>,
    pub ramp_dir: Option<Vec<VarId>>,
}

impl ResourceVars {
    pub fn n_steps(&self) -> usize {
        self.p_input.len()
    }

    pub fn get(&self, t: usize, role: Role) -> Option<VarId> {
        let at = |v: &Vec<VarId>| v.get(t).copied();
        match role {
            Role::PInput => at(&self.p_input),
            Role::PInputIdle => at(&self.p_input_idle),
            Role::PInputSeg(k) => self.p_input_seg.get(k).and_then(at),
            Role::SegActive(k) => self.seg_active.get(k).and_then(at),
            Role::StateActive(s) => self.state_active.get(s).and_then(at),
            Role::POutput => at(&self.p_output),
            Role::RampAbs => at(&self.ramp_abs),
            Role::RampDir => self.ramp_dir.as_ref().and_then(at),
            Role::PGrid | Role::PReUsed => None,
        }
    }

    pub fn all(&self) -> Vec<VarId> {
        let mut v = Vec::new();
        v.extend(&self.p_input);
        v.extend(&self.p_input_idle);
        self.p_input_seg.iter().for_each(|x| v.extend(x));
        self.seg_active.iter().for_each(|x| v.extend(x));
        self.state_active.iter().for_each(|x| v.extend(x));
        v.extend(&self.p_output);
        v.extend(&self.ramp_abs);
        if let Some(d) = &self.ramp_dir {
            v.extend(d);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceVars {
    pub p_grid: Vec<VarId>,
    pub p_re_used: Vec<VarId>,
}

/// Lookup from `(resource, step, role)` to variable ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VarMap {
    pub resources: Vec<ResourceVars>,
    pub balance: Option<BalanceVars>,
}

impl VarMap {
    pub fn n_steps(&self) -> usize {
        self.resources.first().map_or(0, ResourceVars::n_steps)
    }

    /// `resource` is ignored for the system-level grid and RE roles.
    pub fn get(&self, resource: usize, t: usize, role: Role) -> Option<VarId> {
        match role {
            Role::PGrid => self.balance.as_ref()?.p_grid.get(t).copied(),
            Role::PReUsed => self.balance.as_ref()?.p_re_used.get(t).copied(),
            _ => self.resources.get(resource)?.get(t, role),
        }
    }

    pub fn len(&self) -> usize {
        let res: usize = self.resources.iter().map(|r| r.all().len()).sum();
        res + self
            .balance
            .as_ref()
            .map_or(0, |b| b.p_grid.len() + b.p_re_used.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn name(resource: usize, t: usize, role: Role) -> String {
    format!("r{resource}_t{t}_{}", role.label())
}

/// Name, terms, sense and right-hand side of a row waiting to be added.
type Row = (String, Vec<(VarId, f64)>, ConstraintSense, f64);

/// Adds the variables and rows describing one resource over `n_steps`
/// steps of `delta` hours.
///
/// `initial` describes the step just before the horizon: it enters the
/// follower, holding and ramp rows of step 0 as constants. Counting that
/// pinned step, the shortest horizon has two steps, so `n_steps` must be
/// at least 1.
///
/// Rows per step: resource bounds; the input–output map with segment
/// selection gated by the operation state (outside operation the input
/// sits on `p_input_idle` and output is zero); exactly one state;
/// state-dependent input bounds and output cap; follower transitions;
/// minimum and maximum holding windows; ramp limits.
pub fn encode_resource(
    model: &mut ModelHandle,
    resource: usize,
    spec: &ResourceSpec,
    n_steps: usize,
    delta: f64,
    initial: &InitialCondition,
) -> Result<ResourceVars> {
    if n_steps == 0 {
        return Err(Error::Horizon("empty horizon".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Horizon(format!(
            "step length {delta} must be positive"
        )));
    }
    let op = spec.state_index(spec.operation_state_id).ok_or_else(|| {
        Error::Encoding(format!(
            "operation state {} not declared",
            spec.operation_state_id
        ))
    })?;
    let init_idx = spec
        .state_index(initial.state)
        .ok_or_else(|| Error::Encoding(format!("initial state {} not declared", initial.state)))?;
    if spec.segment_table.is_empty() {
        return Err(Error::Encoding("empty segment table".into()));
    }
    let big_m = spec.p_max;
    if spec.uses_ramp_min() && !(big_m > 0.0) {
        return Err(Error::Encoding(format!(
            "ramp_min > 0 needs p_max > 0 for the big-M direction switch, got {big_m}"
        )));
    }

    let n_seg = spec.segment_table.len();
    let n_states = spec.states.len();
    let idle_max = spec
        .states
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != op)
        .map(|(_, s)| s.p_in_max)
        .fold(0.0, f64::max);
    let out_max = spec.states.iter().map(|s| s.p_out_max).fold(0.0, f64::max);
    let seg_out_max = spec
        .segment_table
        .segments
        .iter()
        .map(|s| s.eval(s.lb).max(s.eval(s.ub)))
        .fold(0.0, f64::max);
    let ramp_cap = 2.0 * big_m.abs().max(spec.p_min.abs()).max(1.0);

    let r = resource;
    let mut vars = ResourceVars {
        p_input: Vec::with_capacity(n_steps),
        p_input_idle: Vec::with_capacity(n_steps),
        p_input_seg: vec![Vec::with_capacity(n_steps); n_seg],
        seg_active: vec![Vec::with_capacity(n_steps); n_seg],
        state_active: vec![Vec::with_capacity(n_steps); n_states],
        p_output: Vec::with_capacity(n_steps),
        ramp_abs: Vec::with_capacity(n_steps),
        ramp_dir: spec.uses_ramp_min().then(|| Vec::with_capacity(n_steps)),
    };
    for t in 0..n_steps {
        vars.p_input
            .push(model.add_continuous(name(r, t, Role::PInput), spec.p_min, spec.p_max));
        vars.p_input_idle
            .push(model.add_continuous(name(r, t, Role::PInputIdle), 0.0, idle_max));
        for (k, seg) in spec.segment_table.segments.iter().enumerate() {
            vars.p_input_seg[k].push(model.add_continuous(
                name(r, t, Role::PInputSeg(k)),
                0.0,
                seg.ub.max(0.0),
            ));
        }
        for k in 0..n_seg {
            vars.seg_active[k].push(model.add_binary(name(r, t, Role::SegActive(k))));
        }
        for s in 0..n_states {
            vars.state_active[s].push(model.add_binary(name(r, t, Role::StateActive(s))));
        }
        vars.p_output.push(model.add_continuous(
            name(r, t, Role::POutput),
            0.0,
            out_max.max(seg_out_max),
        ));
        vars.ramp_abs
            .push(model.add_continuous(name(r, t, Role::RampAbs), 0.0, ramp_cap));
        if let Some(dir) = vars.ramp_dir.as_mut() {
            dir.push(model.add_binary(name(r, t, Role::RampDir)));
        }
    }

    let x_state = |s: usize, t: usize| vars.state_active[s][t];
    let mut rows: Vec<Row> = Vec::new();

    for t in 0..n_steps {
        let tag = |what: &str| format!("r{r}_t{t}_{what}");
        let p = vars.p_input[t];

        // input = operating part + idle part
        let mut terms = vec![(p, 1.0), (vars.p_input_idle[t], -1.0)];
        terms.extend((0..n_seg).map(|k| (vars.p_input_seg[k][t], -1.0)));
        rows.push((tag("input_split"), terms, Eq, 0.0));

        // piecewise output
        let mut terms = vec![(vars.p_output[t], 1.0)];
        for (k, seg) in spec.segment_table.segments.iter().enumerate() {
            terms.push((vars.p_input_seg[k][t], -seg.a));
            terms.push((vars.seg_active[k][t], -seg.b));
        }
        rows.push((tag("output"), terms, Eq, 0.0));

        for (k, seg) in spec.segment_table.segments.iter().enumerate() {
            let (pin, x) = (vars.p_input_seg[k][t], vars.seg_active[k][t]);
            rows.push((
                tag(&format!("seg{k}_lb")),
                vec![(pin, 1.0), (x, -seg.lb)],
                Ge,
                0.0,
            ));
            rows.push((
                tag(&format!("seg{k}_ub")),
                vec![(pin, 1.0), (x, -seg.ub)],
                Le,
                0.0,
            ));
        }

        // one segment exactly when operating
        let mut terms: Vec<_> = (0..n_seg).map(|k| (vars.seg_active[k][t], 1.0)).collect();
        terms.push((x_state(op, t), -1.0));
        rows.push((tag("seg_sum"), terms, Eq, 0.0));

        // idle input only outside operation, within that state's bounds
        let mut hi = vec![(vars.p_input_idle[t], 1.0)];
        let mut lo = vec![(vars.p_input_idle[t], 1.0)];
        for (s, st) in spec.states.iter().enumerate() {
            if s != op {
                hi.push((x_state(s, t), -st.p_in_max));
                if st.p_in_min != 0.0 {
                    lo.push((x_state(s, t), -st.p_in_min));
                }
            }
        }
        rows.push((tag("idle_max"), hi, Le, 0.0));
        rows.push((tag("idle_min"), lo, Ge, 0.0));

        rows.push((
            tag("one_state"),
            (0..n_states).map(|s| (x_state(s, t), 1.0)).collect(),
            Eq,
            1.0,
        ));

        let mut lo = vec![(p, 1.0)];
        let mut hi = vec![(p, 1.0)];
        let mut cap = vec![(vars.p_output[t], 1.0)];
        for (s, st) in spec.states.iter().enumerate() {
            lo.push((x_state(s, t), -st.p_in_min));
            hi.push((x_state(s, t), -st.p_in_max));
            cap.push((x_state(s, t), -st.p_out_max));
        }
        rows.push((tag("state_min"), lo, Ge, 0.0));
        rows.push((tag("state_max"), hi, Le, 0.0));
        rows.push((tag("output_cap"), cap, Le, 0.0));

        // followers: x_{s,t-1} - x_{s,t} <= sum_{f in F_s} x_{f,t}
        for (s, st) in spec.states.iter().enumerate() {
            let mut terms = vec![(x_state(s, t), -1.0)];
            for f in &st.followers {
                if let Some(fi) = spec.state_index(*f) {
                    if fi != s {
                        terms.push((x_state(fi, t), -1.0));
                    }
                }
            }
            let rhs = if t == 0 {
                -f64::from(u8::from(init_idx == s))
            } else {
                terms.push((x_state(s, t - 1), 1.0));
                0.0
            };
            rows.push((tag(&format!("follow{s}")), terms, Le, rhs));
        }

        // minimum holding, forward window truncated at the horizon end:
        // h * (x_{s,t} - x_{s,t-1}) <= sum_{u=t}^{t+h-1} x_{s,u}
        for (s, st) in spec.states.iter().enumerate() {
            let h = (st.hold_min as usize).min(n_steps - t);
            if h <= 1 {
                continue;
            }
            let hf = h as f64;
            let mut terms: Vec<_> = (t..t + h).map(|u| (x_state(s, u), -1.0)).collect();
            terms[0].1 += hf;
            let rhs = if t == 0 {
                if init_idx == s {
                    hf
                } else {
                    0.0
                }
            } else {
                terms.push((x_state(s, t - 1), -hf));
                0.0
            };
            rows.push((tag(&format!("hold_min{s}")), terms, Le, rhs));
        }

        // maximum holding: any hold_max + 1 consecutive steps contain
        // another state; the run carried in from before the horizon counts
        for (s, st) in spec.states.iter().enumerate() {
            let Some(max) = st.hold_max else { continue };
            let window = max as usize + 1;
            let first = (t + 1).saturating_sub(window);
            let covered = t + 1 - first;
            let carried = if covered < window && init_idx == s {
                let before = (window - covered) as u32;
                initial.held_steps.unwrap_or(1).min(before)
            } else {
                0
            };
            if covered < window && carried == 0 {
                continue;
            }
            let terms: Vec<_> = (first..=t).map(|u| (x_state(s, u), 1.0)).collect();
            rows.push((
                tag(&format!("hold_max{s}")),
                terms,
                Le,
                max as f64 - carried as f64,
            ));
        }

        // ramp: |P_t - P_{t-1}| bounded by the active state's limits
        let prev: Option<VarId> = t.checked_sub(1).map(|u| vars.p_input[u]);
        let prev_const = if t == 0 { initial.p_input } else { 0.0 };
        let diff = |sign: f64| -> (Vec<(VarId, f64)>, f64) {
            // sign * (P_t - P_{t-1}) as terms and constant moved to the rhs
            let mut terms = vec![(p, sign)];
            if let Some(pp) = prev {
                terms.push((pp, -sign));
            }
            (terms, sign * prev_const)
        };
        let abs = vars.ramp_abs[t];
        for (label, sign) in [("ramp_pos", 1.0), ("ramp_neg", -1.0)] {
            let (mut terms, rhs) = diff(sign);
            terms.push((abs, -1.0));
            rows.push((tag(label), terms, Le, rhs));
        }
        let mut terms = vec![(abs, 1.0)];
        for (s, st) in spec.states.iter().enumerate() {
            terms.push((x_state(s, t), -delta * st.ramp_max));
        }
        rows.push((tag("ramp_max"), terms, Le, 0.0));

        if let Some(dir) = vars.ramp_dir.as_ref() {
            // abs <= d + 2M(1 - dir), abs <= -d + 2M dir
            let m2 = 2.0 * big_m;
            let (mut terms, rhs) = diff(-1.0);
            terms.push((abs, 1.0));
            terms.push((dir[t], m2));
            rows.push((tag("ramp_abs_up"), terms, Le, rhs + m2));
            let (mut terms, rhs) = diff(1.0);
            terms.push((abs, 1.0));
            terms.push((dir[t], -m2));
            rows.push((tag("ramp_abs_down"), terms, Le, rhs));

            let mut terms = vec![(abs, 1.0)];
            for (s, st) in spec.states.iter().enumerate() {
                if st.ramp_min > 0.0 {
                    terms.push((x_state(s, t), -delta * st.ramp_min));
                }
            }
            rows.push((tag("ramp_min"), terms, Ge, 0.0));
        }
    }

    // the initial state's minimum hold carries into the horizon
    let owed = initial.remaining_min_hold(spec) as usize;
    for t in 0..owed.min(n_steps) {
        rows.push((
            format!("r{r}_t{t}_carry_hold"),
            vec![(x_state(init_idx, t), 1.0)],
            Eq,
            1.0,
        ));
    }

    for (label, terms, sense, rhs) in rows {
        model.add_constraint(label, terms, sense, rhs);
    }
    Ok(vars)
}

/// Power balance per step: total input equals grid plus used renewable
/// power, with `0 <= p_grid <= grid_limit` and `0 <= p_re_used <= re`.
/// Without curtailment the renewable power must be taken in full.
pub fn encode_balance(
    model: &mut ModelHandle,
    resources: &[ResourceVars],
    grid_limit: f64,
    re_available: &[f64],
    allow_curtailment: bool,
) -> Result<BalanceVars> {
    let n = resources.first().map_or(0, ResourceVars::n_steps);
    if resources.iter().any(|r| r.n_steps() != n) {
        return Err(Error::Data(
            "resource variable maps differ in length".into(),
        ));
    }
    if re_available.len() != n {
        return Err(Error::Data(format!(
            "renewable series has {} entries for {n} steps",
            re_available.len()
        )));
    }
    if let Some((t, v)) = re_available
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
    {
        return Err(Error::Data(format!(
            "renewable availability at step {t} is {v}"
        )));
    }
    if !(grid_limit >= 0.0) {
        return Err(Error::Data(format!(
            "grid limit {grid_limit} must be non-negative"
        )));
    }

    let mut vars = BalanceVars {
        p_grid: Vec::with_capacity(n),
        p_re_used: Vec::with_capacity(n),
    };
    for (t, &re) in re_available.iter().enumerate() {
        let grid = model.add_continuous(format!("sys_t{t}_p_grid"), 0.0, grid_limit);
        let lower = if allow_curtailment { 0.0 } else { re };
        let used = model.add_continuous(format!("sys_t{t}_p_re_used"), lower, re);
        let mut terms: Vec<_> = resources.iter().map(|r| (r.p_input[t], 1.0)).collect();
        terms.push((grid, -1.0));
        terms.push((used, -1.0));
        model.add_constraint(format!("sys_t{t}_balance"), terms, Eq, 0.0);
        vars.p_grid.push(grid);
        vars.p_re_used.push(used);
    }
    Ok(vars)
}

/// `delta * sum_t sum_r P = demand` over all steps.
pub fn encode_demand(
    model: &mut ModelHandle,
    resources: &[ResourceVars],
    demand: f64,
    delta: f64,
    applies_to: DemandTarget,
) -> Result<usize> {
    let n = resources.first().map_or(0, ResourceVars::n_steps);
    encode_demand_over(model, resources, 0..n, demand, delta, applies_to)
}

/// [`encode_demand`] restricted to the steps in `steps`.
pub fn encode_demand_over(
    model: &mut ModelHandle,
    resources: &[ResourceVars],
    steps: Range<usize>,
    demand: f64,
    delta: f64,
    applies_to: DemandTarget,
) -> Result<usize> {
    if !(demand >= 0.0) {
        return Err(Error::Data(format!("demand {demand} must be non-negative")));
    }
    let mut terms = Vec::new();
    for r in resources {
        for t in steps.clone() {
            let v = match applies_to {
                DemandTarget::Output => r.p_output[t],
                DemandTarget::Input => r.p_input[t],
            };
            terms.push((v, delta));
        }
    }
    Ok(model.add_constraint("sys_demand", terms, Eq, demand))
}
