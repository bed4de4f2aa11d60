use crate::error::{Error, Result};

use super::types::SegmentTable;

/// Slack allowed when deciding whether an input lies on a segment.
pub const SEGMENT_TOL: f64 = 1e-9;

/// Evaluates the piecewise-linear input–output map.
///
/// On a shared boundary (`input == ub_k == lb_{k+1}`) both adjacent pieces
/// apply and the larger output is returned.
pub fn eval_piecewise(input: f64, table: &SegmentTable) -> Result<f64> {
    let (lower, upper) = table.range().ok_or(Error::OutOfRange {
        value: input,
        lower: f64::NAN,
        upper: f64::NAN,
    })?;
    if !(input >= lower - SEGMENT_TOL && input <= upper + SEGMENT_TOL) {
        return Err(Error::OutOfRange {
            value: input,
            lower,
            upper,
        });
    }
    candidate_outputs(input, table, SEGMENT_TOL)
        .reduce(f64::max)
        .ok_or(Error::OutOfRange {
            value: input,
            lower,
            upper,
        })
}

/// Outputs of every segment whose `[lb, ub]` contains `input` (widened by
/// `tol`). More than one value comes back only at segment boundaries.
pub fn candidate_outputs(
    input: f64,
    table: &SegmentTable,
    tol: f64,
) -> impl Iterator<Item = f64> + '_ {
    table
        .segments
        .iter()
        .filter(move |s| input >= s.lb - tol && input <= s.ub + tol)
        .map(move |s| s.eval(input))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn interior_points() {
        let table = SegmentTable::electrolyzer();
        // 0.52 * 0.19 - 0.06
        assert_abs_diff_eq!(
            eval_piecewise(0.19, &table).unwrap(),
            0.0388,
            epsilon = 1e-12
        );
        // 0.56 * 2.4 + 0.15
        assert_abs_diff_eq!(eval_piecewise(2.4, &table).unwrap(), 1.494, epsilon = 1e-12);
        // 0.56 * 2.0 + 0.15
        assert_abs_diff_eq!(eval_piecewise(2.0, &table).unwrap(), 1.27, epsilon = 1e-12);
    }

    #[test]
    fn boundary_takes_the_larger_piece() {
        let table = SegmentTable::electrolyzer();
        // max(0.83 * 1.2 - 0.14, 0.56 * 1.2 + 0.16) = max(0.856, 0.832)
        assert_abs_diff_eq!(eval_piecewise(1.2, &table).unwrap(), 0.856, epsilon = 1e-12);
        // max(0.52 * 0.6 - 0.06, 0.83 * 0.6 - 0.14) = max(0.252, 0.358)
        assert_abs_diff_eq!(eval_piecewise(0.6, &table).unwrap(), 0.358, epsilon = 1e-12);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let table = SegmentTable::electrolyzer();
        assert!(matches!(
            eval_piecewise(2.5, &table),
            Err(Error::OutOfRange { .. })
        ));
        assert!(eval_piecewise(-0.1, &table).is_err());
        assert!(eval_piecewise(f64::NAN, &table).is_err());
        assert!(eval_piecewise(1.0, &SegmentTable { segments: vec![] }).is_err());
    }

    #[test]
    fn monotone_within_each_segment() {
        let table = SegmentTable::electrolyzer();
        for seg in &table.segments {
            assert!(seg.a > 0.0);
            let mut previous = f64::NEG_INFINITY;
            for i in 0..=100 {
                let x = seg.lb + (seg.ub - seg.lb) * i as f64 / 100.0;
                let y = seg.eval(x);
                assert!(y >= previous);
                previous = y;
            }
        }
    }

    #[test]
    fn output_drops_right_after_upper_boundaries() {
        // Pieces 3 and 4 start below where pieces 2 and 3 end, so the map
        // is not monotone across 1.2 kW and 1.8 kW.
        let table = SegmentTable::electrolyzer();
        assert!(eval_piecewise(1.2001, &table).unwrap() < eval_piecewise(1.2, &table).unwrap());
        assert!(eval_piecewise(1.8001, &table).unwrap() < eval_piecewise(1.8, &table).unwrap());
        // the step at 0.6 goes upwards
        assert!(eval_piecewise(0.5999, &table).unwrap() < eval_piecewise(0.6, &table).unwrap());
    }
}
