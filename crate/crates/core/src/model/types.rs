use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking `n_rto * delta_t == delta_tau`.
pub const GRID_REL_TOL: f64 = 1e-12;

/// The two nested time discretizations.
///
/// The site-wide stage plans `n_swo` steps of `delta_tau` hours; each of
/// those steps is refined by the real-time stage into `n_rto` steps of
/// `delta_t` hours, so `n_rto * delta_t == delta_tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub delta_tau: f64,
    pub delta_t: f64,
    pub n_swo: usize,
    pub n_rto: usize,
}

impl TimeGrid {
    pub fn new(delta_tau: f64, delta_t: f64, n_swo: usize, n_rto: usize) -> Result<Self> {
        let grid = TimeGrid {
            delta_tau,
            delta_t,
            n_swo,
            n_rto,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// 10 steps of 0.25 h refined into 10 steps of 0.025 h.
    pub fn case_study() -> Self {
        TimeGrid {
            delta_tau: 0.25,
            delta_t: 0.025,
            n_swo: 10,
            n_rto: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_tau > 0.0 && self.delta_t > 0.0) || self.n_swo == 0 || self.n_rto == 0 {
            return Err(Error::Horizon(format!(
                "time grid fields must be strictly positive: {self:?}"
            )));
        }
        let refined = self.n_rto as f64 * self.delta_t;
        if (refined - self.delta_tau).abs() > GRID_REL_TOL * self.delta_tau {
            return Err(Error::Horizon(format!(
                "n_rto * delta_t = {refined} does not equal delta_tau = {}",
                self.delta_tau
            )));
        }
        Ok(())
    }

    /// Total number of fine steps across the whole horizon.
    pub fn total_rto_steps(&self) -> usize {
        self.n_swo * self.n_rto
    }

    /// Global fine-step index of `t_{tau,k}`.
    pub fn global_index(&self, tau: usize, k: usize) -> usize {
        tau * self.n_rto + k
    }

    /// Inverse of [`global_index`](Self::global_index).
    pub fn split_index(&self, global: usize) -> (usize, usize) {
        (global / self.n_rto, global % self.n_rto)
    }

    /// Step length in hours at the requested level.
    pub fn delta(&self, level: Level) -> f64 {
        match level {
            Level::Swo => self.delta_tau,
            Level::Rto => self.delta_t,
        }
    }
}

/// Which of the two stages a trajectory belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Swo,
    Rto,
}

/// One linear piece `output = a * input + b` valid on `[lb, ub]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub lb: f64,
    pub ub: f64,
    pub a: f64,
    pub b: f64,
}

impl Segment {
    pub fn eval(&self, input: f64) -> f64 {
        self.a * input + self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentTable {
    pub segments: Vec<Segment>,
}

impl SegmentTable {
    /// Input–output map of the case-study electrolyzer.
    pub fn electrolyzer() -> Self {
        let seg = |lb, ub, a, b| Segment { lb, ub, a, b };
        SegmentTable {
            segments: vec![
                seg(0.0, 0.6, 0.52, -0.06),
                seg(0.6, 1.2, 0.83, -0.14),
                seg(1.2, 1.8, 0.56, 0.16),
                seg(1.8, 2.4, 0.56, 0.15),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// `[lb_1, ub_K]`, or `None` for an empty table.
    pub fn range(&self) -> Option<(f64, f64)> {
        Some((self.segments.first()?.lb, self.segments.last()?.ub))
    }
}

pub type StateId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub id: StateId,
    pub name: String,
    /// Minimum input power in this state, kW.
    pub p_in_min: f64,
    /// Maximum input power in this state, kW.
    pub p_in_max: f64,
    /// Output cap in this state, kW.
    pub p_out_max: f64,
    /// Minimum number of consecutive steps once entered.
    pub hold_min: u32,
    /// Maximum number of consecutive steps; `None` means unbounded.
    pub hold_max: Option<u32>,
    /// States that may directly follow this one.
    pub followers: Vec<StateId>,
    /// kW/h
    pub ramp_min: f64,
    /// kW/h
    pub ramp_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSpec {
    pub name: String,
    pub segment_table: SegmentTable,
    pub states: Vec<StateSpec>,
    pub operation_state_id: StateId,
    pub initial_state: StateId,
    pub initial_input: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl ResourceSpec {
    /// Case-study electrolyzer: three states (off, stand-by, operation) and
    /// four input–output segments.
    pub fn electrolyzer(name: impl Into<String>) -> Self {
        let state = |id,
                     name: &str,
                     p_in_min,
                     p_in_max,
                     p_out_max,
                     hold_min,
                     followers: &[StateId],
                     ramp_max| StateSpec {
            id,
            name: name.to_string(),
            p_in_min,
            p_in_max,
            p_out_max,
            hold_min,
            hold_max: None,
            followers: followers.to_vec(),
            ramp_min: 0.0,
            ramp_max,
        };
        ResourceSpec {
            name: name.into(),
            segment_table: SegmentTable::electrolyzer(),
            states: vec![
                state(0, "off", 0.0, 0.0, 0.0, 4, &[2], 25000.0),
                state(1, "stand-by", 0.19, 0.19, 0.0, 2, &[0, 2], 3456.0),
                state(2, "operation", 0.19, 2.4, 1.5, 4, &[0, 1], 3456.0),
            ],
            operation_state_id: 2,
            initial_state: 0,
            initial_input: 0.0,
            p_min: 0.0,
            p_max: 2.4,
        }
    }

    pub fn state_index(&self, id: StateId) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }

    pub fn state(&self, id: StateId) -> Option<&StateSpec> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn operation_state(&self) -> Option<&StateSpec> {
        self.state(self.operation_state_id)
    }

    pub fn is_operation(&self, id: StateId) -> bool {
        id == self.operation_state_id
    }

    /// Whether `to` may directly follow `from` (staying is always allowed).
    pub fn may_follow(&self, from: StateId, to: StateId) -> bool {
        from == to || self.state(from).is_some_and(|s| s.followers.contains(&to))
    }

    pub fn uses_ramp_min(&self) -> bool {
        self.states.iter().any(|s| s.ramp_min > 0.0)
    }
}

/// Whether the demand target counts input or output energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandTarget {
    Input,
    #[default]
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub resources: Vec<ResourceSpec>,
    /// kW
    pub grid_p_max: f64,
    pub allow_curtailment: bool,
    /// Energy target over the site-wide horizon, kWh.
    #[serde(default)]
    pub demand: Option<f64>,
    #[serde(default)]
    pub demand_applies_to: DemandTarget,
}

impl SystemSpec {
    /// `count` identical case-study electrolyzers behind a 10 kW grid
    /// connection, curtailment allowed, no demand target.
    pub fn electrolyzers(count: usize) -> Self {
        SystemSpec {
            resources: (0..count)
                .map(|i| ResourceSpec::electrolyzer(format!("electrolyzer-{i}")))
                .collect(),
            grid_p_max: 10.0,
            allow_curtailment: true,
            demand: None,
            demand_applies_to: DemandTarget::Output,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Operating point of one resource during one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourcePoint {
    pub state: StateId,
    pub p_input: f64,
    pub p_output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub resources: Vec<ResourcePoint>,
    pub p_grid: f64,
    pub p_re_used: f64,
}

impl StepRecord {
    pub fn total_input(&self) -> f64 {
        self.resources.iter().map(|r| r.p_input).sum()
    }

    pub fn total_output(&self) -> f64 {
        self.resources.iter().map(|r| r.p_output).sum()
    }
}

/// Condition of a resource just before the first step of a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub state: StateId,
    pub p_input: f64,
    /// Consecutive steps the state has been held, including the last one.
    /// `None` treats the minimum holding duration as already satisfied.
    pub held_steps: Option<u32>,
}

impl InitialCondition {
    pub fn cold_start(spec: &ResourceSpec) -> Self {
        InitialCondition {
            state: spec.initial_state,
            p_input: spec.initial_input,
            held_steps: None,
        }
    }

    /// Steps of the initial state that are still owed to its minimum hold.
    pub fn remaining_min_hold(&self, spec: &ResourceSpec) -> u32 {
        match (self.held_steps, spec.state(self.state)) {
            (Some(held), Some(state)) => state.hold_min.saturating_sub(held),
            _ => 0,
        }
    }
}

/// A realized or planned trajectory at one resolution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    /// Per-resource condition preceding `steps[0]`, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<InitialCondition>>,
}

impl Trajectory {
    pub fn new(steps: Vec<StepRecord>) -> Self {
        Trajectory {
            steps,
            initial: None,
        }
    }

    pub fn with_initial(mut self, initial: Vec<InitialCondition>) -> Self {
        self.initial = Some(initial);
        self
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn input_energy(&self, delta: f64) -> f64 {
        self.steps.iter().map(StepRecord::total_input).sum::<f64>() * delta
    }

    pub fn output_energy(&self, delta: f64) -> f64 {
        self.steps.iter().map(StepRecord::total_output).sum::<f64>() * delta
    }
}
