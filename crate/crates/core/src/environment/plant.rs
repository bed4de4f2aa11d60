use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eval_piecewise, InitialCondition, StateId, StepRecord, SystemSpec, Trajectory};

use super::ActualSeries;

/// Commanded state and input of one resource.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoint {
    pub resource: usize,
    pub state: StateId,
    pub p_input_kw: f64,
}

/// One control write. `p_grid_kw` is the grid draw the setpoints were
/// planned with; without it the plant draws only what renewables miss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantRequest {
    pub step: usize,
    pub setpoints: Vec<Setpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_grid_kw: Option<f64>,
}

impl PlantRequest {
    /// Request for the resources of one trajectory step.
    pub fn from_step(step: usize, record: &StepRecord) -> Self {
        PlantRequest {
            step,
            setpoints: record
                .resources
                .iter()
                .enumerate()
                .map(|(resource, p)| Setpoint {
                    resource,
                    state: p.state,
                    p_input_kw: p.p_input,
                })
                .collect(),
            p_grid_kw: Some(record.p_grid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedPoint {
    pub state: StateId,
    pub p_input: f64,
    pub p_output: f64,
    /// The commanded state change was not allowed and the state was held.
    pub rejected: bool,
    /// The commanded input was moved into the state's bounds.
    pub clipped: bool,
}

/// What the plant reports after executing one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub step: usize,
    pub resources: Vec<RealizedPoint>,
    /// Renewable power actually available, kW.
    pub re_available: f64,
    pub p_grid: f64,
    pub p_re_used: f64,
}

impl Measurement {
    pub fn record(&self) -> StepRecord {
        StepRecord {
            resources: self
                .resources
                .iter()
                .map(|r| crate::model::ResourcePoint {
                    state: r.state,
                    p_input: r.p_input,
                    p_output: r.p_output,
                })
                .collect(),
            p_grid: self.p_grid,
            p_re_used: self.p_re_used,
        }
    }

    pub fn any_rejected(&self) -> bool {
        self.resources.iter().any(|r| r.rejected)
    }

    pub fn any_clipped(&self) -> bool {
        self.resources.iter().any(|r| r.clipped)
    }
}

/// Something that executes setpoints and reports measurements.
pub trait PlantLink {
    fn exchange(&mut self, request: &PlantRequest) -> Result<Measurement>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dwell {
    state: StateId,
    /// `None` until the first change: the initial state counts as settled.
    held: Option<u32>,
    p_input: f64,
}

/// Simulated fleet that follows the state rules and the piecewise map.
///
/// A state change is accepted when the new state is a follower of the
/// current one and the current state has been held for its minimum
/// duration; otherwise the current state is kept. Inputs are projected
/// into the realized state's bounds. Renewable availability comes from the
/// actual series, indexed by the request's step.
#[derive(Debug, Clone)]
pub struct PlantSim {
    spec: SystemSpec,
    actual: ActualSeries,
    dwell: Vec<Dwell>,
    noise: Option<(f64, u64)>,
    log: Vec<Measurement>,
}

impl PlantSim {
    pub fn new(spec: SystemSpec, actual: ActualSeries) -> Self {
        let dwell = spec
            .resources
            .iter()
            .map(|r| Dwell {
                state: r.initial_state,
                held: None,
                p_input: r.initial_input,
            })
            .collect();
        PlantSim {
            spec,
            actual,
            dwell,
            noise: None,
            log: Vec::new(),
        }
    }

    /// Perturbs every commanded input by a uniform draw from
    /// `[-amplitude, amplitude]` kW before projection. Off by default.
    pub fn with_input_noise(mut self, amplitude_kw: f64, seed: u64) -> Self {
        self.noise = (amplitude_kw > 0.0).then_some((amplitude_kw, seed));
        self
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    /// Current condition of each resource, for the next solve.
    pub fn conditions(&self) -> Vec<InitialCondition> {
        self.dwell
            .iter()
            .map(|d| InitialCondition {
                state: d.state,
                p_input: d.p_input,
                held_steps: d.held,
            })
            .collect()
    }

    /// Everything executed so far, with the starting condition attached.
    pub fn trajectory(&self) -> Trajectory {
        let initial = self
            .spec
            .resources
            .iter()
            .map(InitialCondition::cold_start)
            .collect();
        Trajectory::new(self.log.iter().map(Measurement::record).collect()).with_initial(initial)
    }

    pub fn apply(&mut self, request: &PlantRequest) -> Result<Measurement> {
        let n = self.spec.resources.len();
        if request.setpoints.len() != n {
            return Err(Error::Data(format!(
                "request for step {} has {} setpoints, plant has {n} resources",
                request.step,
                request.setpoints.len()
            )));
        }
        let re_available = *self.actual.values.get(request.step).ok_or_else(|| {
            Error::Data(format!(
                "step {} beyond the {}-step trace",
                request.step,
                self.actual.len()
            ))
        })?;

        let mut points = Vec::with_capacity(n);
        for (r, res) in self.spec.resources.iter().enumerate() {
            let sp = request
                .setpoints
                .iter()
                .find(|s| s.resource == r)
                .ok_or_else(|| Error::Data(format!("no setpoint for resource {r}")))?;
            let d = self.dwell[r];
            let cur = res
                .state(d.state)
                .ok_or_else(|| Error::Data(format!("resource {r} in unknown state {}", d.state)))?;
            let allowed = sp.state == d.state
                || (res.may_follow(d.state, sp.state)
                    && res.state(sp.state).is_some()
                    && d.held.is_none_or(|h| h >= cur.hold_min));
            let state = if allowed { sp.state } else { d.state };
            let st = res.state(state).expect("state checked above");

            let mut commanded = sp.p_input_kw;
            if let Some((amp, seed)) = self.noise {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(request.step as u64);
                rng.set_word_pos(r as u128 * 16);
                commanded += rng.random_range(-amp..=amp);
            }
            let lo = st.p_in_min.max(res.p_min);
            let hi = st.p_in_max.min(res.p_max);
            let p_input = commanded.clamp(lo, hi);
            let clipped = (p_input - sp.p_input_kw).abs() > 1e-9;
            let p_output = if res.is_operation(state) {
                eval_piecewise(p_input, &res.segment_table)?.min(st.p_out_max)
            } else {
                0.0
            };
            points.push(RealizedPoint {
                state,
                p_input,
                p_output,
                rejected: !allowed,
                clipped,
            });
        }

        let total: f64 = points.iter().map(|p| p.p_input).sum();
        let least_grid = (total - re_available).max(0.0);
        let p_grid = match request.p_grid_kw {
            Some(g) => g.clamp(least_grid, total),
            None => least_grid,
        };
        let p_re_used = (total - p_grid).max(0.0);

        for (d, p) in self.dwell.iter_mut().zip(&points) {
            if p.state == d.state {
                d.held = d.held.map(|h| h.saturating_add(1));
            } else {
                d.state = p.state;
                d.held = Some(1);
            }
            d.p_input = p.p_input;
        }
        let m = Measurement {
            step: request.step,
            resources: points,
            re_available,
            p_grid,
            p_re_used,
        };
        self.log.push(m.clone());
        Ok(m)
    }
}

impl PlantLink for PlantSim {
    fn exchange(&mut self, request: &PlantRequest) -> Result<Measurement> {
        self.apply(request)
    }
}
