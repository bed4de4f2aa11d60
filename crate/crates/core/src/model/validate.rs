use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::{ResourceSpec, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecViolationCode {
    NoResources,
    NegativeGridLimit,
    NegativeDemand,
    EmptySegmentTable,
    InvalidSegmentBounds,
    NonContiguousSegments,
    SegmentCoverage,
    DuplicateStateId,
    UnknownFollower,
    InvalidStateBounds,
    InvalidHoldBounds,
    InvalidRampBounds,
    UnknownOperationState,
    UnknownInitialState,
    InitialInputOutOfBounds,
    InvalidResourceBounds,
    OperationUnreachable,
    NonFinite,
}

impl SpecViolationCode {
    pub fn as_str(&self) -> &'static str {
        use SpecViolationCode::*;
        match self {
            NoResources => "no resources",
            NegativeGridLimit => "negative grid limit",
            NegativeDemand => "negative demand",
            EmptySegmentTable => "empty segment table",
            InvalidSegmentBounds => "invalid segment bounds",
            NonContiguousSegments => "non-contiguous segments",
            SegmentCoverage => "segment coverage",
            DuplicateStateId => "duplicate state id",
            UnknownFollower => "unknown follower",
            InvalidStateBounds => "invalid state bounds",
            InvalidHoldBounds => "invalid hold bounds",
            InvalidRampBounds => "invalid ramp bounds",
            UnknownOperationState => "unknown operation state",
            UnknownInitialState => "unknown initial state",
            InitialInputOutOfBounds => "initial input out of bounds",
            InvalidResourceBounds => "invalid resource bounds",
            OperationUnreachable => "operation unreachable",
            NonFinite => "non-finite value",
        }
    }
}

impl fmt::Display for SpecViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecViolation {
    pub code: SpecViolationCode,
    /// Index of the offending resource, if the violation is resource-level.
    pub resource: Option<usize>,
    pub detail: String,
}

impl fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.resource {
            Some(r) => write!(f, "resource {r}: {}: {}", self.code, self.detail),
            None => write!(f, "{}: {}", self.code, self.detail),
        }
    }
}

/// Every invariant violation in a spec. Empty means valid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<SpecViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, code: SpecViolationCode) -> usize {
        self.violations.iter().filter(|v| v.code == code).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&lines.join("; "))
    }
}

pub fn validate_system(spec: &SystemSpec) -> ValidationReport {
    let mut out = Vec::new();
    let mut push = |code, resource, detail: String| {
        out.push(SpecViolation {
            code,
            resource,
            detail,
        })
    };

    if spec.resources.is_empty() {
        push(
            SpecViolationCode::NoResources,
            None,
            "system has no resources".into(),
        );
    }
    if !spec.grid_p_max.is_finite() {
        push(SpecViolationCode::NonFinite, None, "grid_p_max".into());
    } else if spec.grid_p_max < 0.0 {
        push(
            SpecViolationCode::NegativeGridLimit,
            None,
            format!("grid_p_max = {}", spec.grid_p_max),
        );
    }
    if let Some(d) = spec.demand {
        if !(d >= 0.0) {
            push(
                SpecViolationCode::NegativeDemand,
                None,
                format!("demand = {d}"),
            );
        }
    }

    for (r, res) in spec.resources.iter().enumerate() {
        for (code, detail) in resource_violations(res) {
            push(code, Some(r), detail);
        }
    }
    ValidationReport { violations: out }
}

fn resource_violations(res: &ResourceSpec) -> Vec<(SpecViolationCode, String)> {
    use SpecViolationCode::*;
    let mut out = Vec::new();

    let mut numbers = vec![res.p_min, res.p_max, res.initial_input];
    for seg in &res.segment_table.segments {
        numbers.extend([seg.lb, seg.ub, seg.a, seg.b]);
    }
    for s in &res.states {
        numbers.extend([s.p_in_min, s.p_in_max, s.p_out_max, s.ramp_min, s.ramp_max]);
    }
    if numbers.iter().any(|x| !x.is_finite()) {
        out.push((
            NonFinite,
            "resource contains NaN or infinite parameters".into(),
        ));
        return out;
    }

    let segments = &res.segment_table.segments;
    if segments.is_empty() {
        out.push((EmptySegmentTable, "segment table is empty".into()));
    }
    for (k, seg) in segments.iter().enumerate() {
        if !(seg.lb < seg.ub) {
            out.push((
                InvalidSegmentBounds,
                format!("segment {k}: lb {} >= ub {}", seg.lb, seg.ub),
            ));
        }
    }
    for (k, pair) in segments.windows(2).enumerate() {
        if pair[1].lb != pair[0].ub {
            out.push((
                NonContiguousSegments,
                format!(
                    "ub of segment {k} is {} but lb of segment {} is {}",
                    pair[0].ub,
                    k + 1,
                    pair[1].lb
                ),
            ));
        }
    }

    if !(res.p_min <= res.p_max) {
        out.push((
            InvalidResourceBounds,
            format!("p_min {} > p_max {}", res.p_min, res.p_max),
        ));
    }

    let mut ids = BTreeSet::new();
    for s in &res.states {
        if !ids.insert(s.id) {
            out.push((
                DuplicateStateId,
                format!("state id {} declared twice", s.id),
            ));
        }
    }
    for s in &res.states {
        if !(s.p_in_min <= s.p_in_max) || s.p_in_min < 0.0 || s.p_out_max < 0.0 {
            out.push((
                InvalidStateBounds,
                format!(
                    "state {}: input [{}, {}], output cap {}",
                    s.id, s.p_in_min, s.p_in_max, s.p_out_max
                ),
            ));
        }
        if s.hold_min < 1 || s.hold_max.is_some_and(|m| m < s.hold_min) {
            out.push((
                InvalidHoldBounds,
                format!(
                    "state {}: hold_min {} hold_max {:?}",
                    s.id, s.hold_min, s.hold_max
                ),
            ));
        }
        if !(s.ramp_min <= s.ramp_max) || s.ramp_min < 0.0 {
            out.push((
                InvalidRampBounds,
                format!("state {}: ramp [{}, {}]", s.id, s.ramp_min, s.ramp_max),
            ));
        }
        for f in &s.followers {
            if !ids.contains(f) {
                out.push((
                    UnknownFollower,
                    format!("state {} lists unknown follower {f}", s.id),
                ));
            }
        }
    }

    match res.operation_state() {
        None => out.push((
            UnknownOperationState,
            format!("operation state {} is not declared", res.operation_state_id),
        )),
        Some(op) => {
            if let Some((lo, hi)) = res.segment_table.range() {
                if lo > op.p_in_min || hi < op.p_in_max {
                    out.push((
                        SegmentCoverage,
                        format!(
                            "segments cover [{lo}, {hi}] but operation needs [{}, {}]",
                            op.p_in_min, op.p_in_max
                        ),
                    ));
                }
            }
            for s in &res.states {
                if !reaches(res, s.id, op.id) {
                    out.push((
                        OperationUnreachable,
                        format!(
                            "operation state {} cannot be reached from state {}",
                            op.id, s.id
                        ),
                    ));
                }
            }
        }
    }

    match res.state(res.initial_state) {
        None => out.push((
            UnknownInitialState,
            format!("initial state {} is not declared", res.initial_state),
        )),
        Some(s) => {
            if res.initial_input < s.p_in_min || res.initial_input > s.p_in_max {
                out.push((
                    InitialInputOutOfBounds,
                    format!(
                        "initial input {} outside [{}, {}]",
                        res.initial_input, s.p_in_min, s.p_in_max
                    ),
                ));
            }
        }
    }
    out
}

fn reaches(res: &ResourceSpec, from: u32, to: u32) -> bool {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        if s == to {
            return true;
        }
        for &f in res
            .state(s)
            .map(|st| st.followers.as_slice())
            .unwrap_or(&[])
        {
            if seen.insert(f) {
                queue.push_back(f);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::types::SystemSpec;

    #[test]
    fn default_spec_is_valid() {
        let report = validate_system(&SystemSpec::electrolyzers(3));
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn unknown_follower() {
        let mut spec = SystemSpec::electrolyzers(1);
        spec.resources[0].states[2].followers = vec![5];
        let report = validate_system(&spec);
        assert_eq!(report.violations.len(), 1, "{report}");
        assert_eq!(
            report.violations[0].code,
            SpecViolationCode::UnknownFollower
        );
        assert_eq!(report.violations[0].code.as_str(), "unknown follower");
    }

    #[test]
    fn gap_in_segments() {
        let mut spec = SystemSpec::electrolyzers(1);
        spec.resources[0].segment_table.segments[1].lb = 0.7;
        let report = validate_system(&spec);
        assert_eq!(report.violations.len(), 1, "{report}");
        assert_eq!(
            report.violations[0].code,
            SpecViolationCode::NonContiguousSegments
        );
    }

    #[test]
    fn breaking_reachability_of_operation_is_reported() {
        // every single follower-set mutation that cuts a path to operation
        let cases: [(usize, Vec<u32>); 4] = [(0, vec![]), (0, vec![0]), (1, vec![1]), (1, vec![])];
        for (state, followers) in cases {
            let mut spec = SystemSpec::electrolyzers(1);
            spec.resources[0].states[state].followers = followers.clone();
            let report = validate_system(&spec);
            assert!(
                report.count(SpecViolationCode::OperationUnreachable) > 0,
                "state {state} followers {followers:?}: {report}"
            );
        }
    }

    #[test]
    fn system_level_checks() {
        let mut spec = SystemSpec::electrolyzers(0);
        spec.grid_p_max = -1.0;
        spec.demand = Some(-2.0);
        let report = validate_system(&spec);
        assert_eq!(report.count(SpecViolationCode::NoResources), 1);
        assert_eq!(report.count(SpecViolationCode::NegativeGridLimit), 1);
        assert_eq!(report.count(SpecViolationCode::NegativeDemand), 1);
    }

    #[test]
    fn resource_level_checks() {
        let mut spec = SystemSpec::electrolyzers(1);
        let res = &mut spec.resources[0];
        res.operation_state_id = 9;
        res.initial_state = 7;
        res.p_min = 3.0;
        res.states[1].hold_min = 0;
        res.states[1].ramp_min = 5000.0;
        let report = validate_system(&spec);
        for code in [
            SpecViolationCode::UnknownOperationState,
            SpecViolationCode::UnknownInitialState,
            SpecViolationCode::InvalidResourceBounds,
            SpecViolationCode::InvalidHoldBounds,
            SpecViolationCode::InvalidRampBounds,
        ] {
            assert_eq!(report.count(code), 1, "{code}: {report}");
        }
    }

    #[test]
    fn narrow_segments_fail_coverage() {
        let mut spec = SystemSpec::electrolyzers(1);
        spec.resources[0].segment_table.segments.pop();
        let report = validate_system(&spec);
        assert_eq!(report.count(SpecViolationCode::SegmentCoverage), 1);
    }
}
