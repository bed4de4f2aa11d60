//! Domain types for fleets of flexible resources, plus reference
//! implementations of the input–output map and the state rules that do not
//! touch any optimization code.

mod check;
mod piecewise;
mod types;
mod validate;

pub use check::{
    check_trajectory, check_with_delta, TrajectoryViolation, TrajectoryViolationCode, CHECK_TOL,
};
pub use piecewise::{candidate_outputs, eval_piecewise, SEGMENT_TOL};
pub use types::{
    DemandTarget, InitialCondition, Level, ResourcePoint, ResourceSpec, Segment, SegmentTable,
    StateId, StateSpec, StepRecord, SystemSpec, TimeGrid, Trajectory, GRID_REL_TOL,
};
pub use validate::{validate_system, SpecViolation, SpecViolationCode, ValidationReport};

use crate::error::{Error, Result};

/// Ratio of output to input energy over a trajectory.
///
/// The step length cancels, so it is not needed.
pub fn efficiency(traj: &Trajectory) -> Result<f64> {
    let input: f64 = traj.steps.iter().map(StepRecord::total_input).sum();
    if !(input > 0.0) {
        return Err(Error::UndefinedEfficiency);
    }
    let output: f64 = traj.steps.iter().map(StepRecord::total_output).sum();
    Ok(output / input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant(state: StateId, p_input: f64, steps: usize) -> Trajectory {
        let p_output = if state == 2 {
            eval_piecewise(p_input, &SegmentTable::electrolyzer()).unwrap()
        } else {
            0.0
        };
        let step = StepRecord {
            resources: vec![ResourcePoint {
                state,
                p_input,
                p_output,
            }],
            p_grid: p_input,
            p_re_used: 0.0,
        };
        Trajectory::new(vec![step; steps])
    }

    #[test]
    fn full_load_efficiency() {
        let eta = efficiency(&constant(2, 2.4, 10)).unwrap();
        assert_abs_diff_eq!(eta, 1.494 / 2.4, epsilon = 1e-12);
        assert_abs_diff_eq!(eta, 0.6225, epsilon = 1e-9);
    }

    #[test]
    fn minimum_load_efficiency() {
        let eta = efficiency(&constant(2, 0.19, 4)).unwrap();
        assert_abs_diff_eq!(eta, 0.0388 / 0.19, epsilon = 1e-12);
        assert!((eta - 0.2042).abs() < 1e-4);
    }

    #[test]
    fn standby_lowers_efficiency() {
        let running = constant(2, 1.2, 4);
        let mut mixed = running.clone();
        mixed.steps.extend(constant(1, 0.19, 4).steps);
        assert!(efficiency(&mixed).unwrap() < efficiency(&running).unwrap());
    }

    #[test]
    fn zero_input_is_undefined() {
        assert!(matches!(
            efficiency(&constant(0, 0.0, 3)),
            Err(Error::UndefinedEfficiency)
        ));
        assert!(matches!(
            efficiency(&Trajectory::default()),
            Err(Error::UndefinedEfficiency)
        ));
    }

    #[test]
    fn default_system_json_matches_builtin() {
        let text = include_str!("../../../../data/default_system.json");
        let parsed = SystemSpec::from_json(text).unwrap();
        let mut expected = SystemSpec::electrolyzers(3);
        expected.demand = parsed.demand;
        assert_eq!(parsed, expected);
        assert!(validate_system(&parsed).is_valid());
    }

    #[test]
    fn time_grid_rules() {
        assert!(TimeGrid::case_study().validate().is_ok());
        assert!(TimeGrid::new(0.25, 0.025, 10, 9).is_err());
        assert!(TimeGrid::new(0.25, 0.025, 0, 10).is_err());
        assert!(TimeGrid::new(-0.25, -0.025, 1, 10).is_err());
        let grid = TimeGrid::new(1.0, 1.0 / 3.0, 2, 3).unwrap();
        assert_eq!(grid.global_index(1, 2), 5);
        assert_eq!(grid.split_index(5), (1, 2));
    }
}
