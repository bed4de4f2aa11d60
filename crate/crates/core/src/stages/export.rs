use std::io::Write;

use crate::error::Result;
use crate::model::Trajectory;

use super::{Plan, SoS};

/// Columns of the flat trajectory CSV: one row per step and resource.
pub const TRAJECTORY_CSV_HEADER: [&str; 8] = [
    "step",
    "resource",
    "state",
    "p_input_kw",
    "p_output_kw",
    "p_grid_kw",
    "p_re_used_kw",
    "parent_tau",
];

fn write_rows<W: Write>(out: W, traj: &Trajectory, parent: Option<usize>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_CSV_HEADER)?;
    let parent = parent.map(|t| t.to_string()).unwrap_or_default();
    for (t, step) in traj.steps.iter().enumerate() {
        for (r, point) in step.resources.iter().enumerate() {
            w.write_record([
                t.to_string(),
                r.to_string(),
                point.state.to_string(),
                point.p_input.to_string(),
                point.p_output.to_string(),
                step.p_grid.to_string(),
                step.p_re_used.to_string(),
                parent.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plan as CSV; `parent_tau` is left empty.
pub fn write_plan_csv<W: Write>(out: W, plan: &Plan) -> Result<()> {
    write_rows(out, &plan.trajectory, None)
}

/// Set of setpoints as CSV; `step` counts fine steps within `parent_tau`.
pub fn write_sos_csv<W: Write>(out: W, sos: &SoS) -> Result<()> {
    write_rows(out, &sos.trajectory, Some(sos.tau))
}
