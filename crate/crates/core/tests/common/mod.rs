//! Exhaustive reference solutions for single-electrolyzer instances.
//!
//! Written against the published tables directly (not the crate's types) so
//! that the MILP and this enumeration share no code.

#![allow(dead_code)]

/// `(lb, ub, a, b)` of the input-output map, kW.
pub const SEGMENTS: [(f64, f64, f64, f64); 4] = [
    (0.0, 0.6, 0.52, -0.06),
    (0.6, 1.2, 0.83, -0.14),
    (1.2, 1.8, 0.56, 0.16),
    (1.8, 2.4, 0.56, 0.15),
];

pub const OFF: u32 = 0;
pub const STANDBY: u32 = 1;
pub const OPERATION: u32 = 2;
pub const STATES: [u32; 3] = [OFF, STANDBY, OPERATION];

/// `(p_in_min, p_in_max, hold_min, followers)`
pub fn state_row(s: u32) -> (f64, f64, usize, &'static [u32]) {
    match s {
        OFF => (0.0, 0.0, 4, &[OPERATION]),
        STANDBY => (0.19, 0.19, 2, &[OFF, OPERATION]),
        OPERATION => (0.19, 2.4, 4, &[OFF, STANDBY]),
        _ => unreachable!(),
    }
}

/// Every state sequence of length `n` reachable from a settled `off`,
/// with runs entered inside the horizon held for their minimum unless they
/// reach its end.
pub fn state_sequences(n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut seq = vec![OFF; n];
    fn rec(t: usize, seq: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let n = seq.len();
        if t == n {
            if holds_ok(seq) {
                out.push(seq.clone());
            }
            return;
        }
        let prev = if t == 0 { OFF } else { seq[t - 1] };
        for s in STATES {
            if s == prev || state_row(prev).3.contains(&s) {
                seq[t] = s;
                rec(t + 1, seq, out);
            }
        }
    }
    rec(0, &mut seq, &mut out);
    out
}

fn holds_ok(seq: &[u32]) -> bool {
    let n = seq.len();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && seq[end + 1] == seq[start] {
            end += 1;
        }
        let entered_here = start > 0 || seq[0] != OFF;
        let reaches_end = end + 1 == n;
        if entered_here && !reaches_end && end - start + 1 < state_row(seq[start]).2 {
            return false;
        }
        start = end + 1;
    }
    true
}

/// Best output at `p` over the segments containing it.
pub fn output(p: f64) -> Option<f64> {
    SEGMENTS
        .iter()
        .filter(|s| p >= s.0 - 1e-12 && p <= s.1 + 1e-12)
        .map(|s| s.2 * p + s.3)
        .reduce(f64::max)
}

/// All outputs attainable at `p` (two on a shared breakpoint).
pub fn outputs(p: f64) -> Vec<f64> {
    SEGMENTS
        .iter()
        .filter(|s| p >= s.0 - 1e-12 && p <= s.1 + 1e-12)
        .map(|s| s.2 * p + s.3)
        .collect()
}

/// Candidate inputs in operation: segment endpoints inside the state range
/// plus `extra` points (renewable caps) when they fall inside it.
fn breakpoints(extra: &[f64]) -> Vec<f64> {
    let mut v = vec![0.19];
    for s in SEGMENTS {
        for p in [s.0, s.1] {
            if p >= 0.19 {
                v.push(p);
            }
        }
    }
    for &p in extra {
        if (0.19..=2.4).contains(&p) {
            v.push(p);
        }
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn fixed_input(s: u32) -> f64 {
    state_row(s).0
}

/// Odometer over `choices[i]` for each position, calling `f` with the picks.
fn for_each_combo(choices: &[Vec<f64>], mut f: impl FnMut(&[f64])) {
    let mut idx = vec![0usize; choices.len()];
    let mut pick: Vec<f64> = choices.iter().map(|c| c[0]).collect();
    if choices.iter().any(Vec::is_empty) {
        return;
    }
    loop {
        f(&pick);
        let mut i = 0;
        loop {
            if i == choices.len() {
                return;
            }
            idx[i] += 1;
            if idx[i] < choices[i].len() {
                pick[i] = choices[i][idx[i]];
                break;
            }
            idx[i] = 0;
            pick[i] = choices[i][0];
            i += 1;
        }
    }
}

/// Minimum cost, EUR, of meeting output `demand` kWh exactly over `n`
/// steps of `delta` h with renewable power `re` (curtailable) and prices
/// `price` EUR/MWh. `None` when infeasible.
///
/// With states and segment choices fixed this is a linear program with one
/// coupling row, so some optimum has at most one input off a breakpoint
/// (segment endpoint or renewable cap). Every step takes each role in turn.
pub fn min_cost(re: &[f64], price: &[f64], delta: f64, demand: f64, grid_max: f64) -> Option<f64> {
    let n = re.len();
    let cost = |t: usize, p: f64| price[t] * (p - re[t]).max(0.0) * delta / 1000.0;
    let mut best: Option<f64> = None;
    let mut consider = |c: f64| {
        if best.is_none_or(|b| c < b) {
            best = Some(c);
        }
    };
    for seq in state_sequences(n) {
        let op: Vec<usize> = (0..n).filter(|&t| seq[t] == OPERATION).collect();
        // fixed part: standby draw
        let mut base_cost = 0.0;
        let mut ok = true;
        for t in 0..n {
            if seq[t] != OPERATION {
                let p = fixed_input(seq[t]);
                if p - re[t] > grid_max + 1e-12 {
                    ok = false;
                }
                base_cost += cost(t, p);
            }
        }
        if !ok {
            continue;
        }
        if op.is_empty() {
            if demand.abs() <= 1e-9 {
                consider(base_cost);
            }
            continue;
        }
        for &j in &op {
            let others: Vec<usize> = op.iter().copied().filter(|&t| t != j).collect();
            // each other step picks a breakpoint and, on a shared breakpoint,
            // either output
            let choices: Vec<Vec<f64>> = others
                .iter()
                .map(|&t| {
                    breakpoints(&[re[t]])
                        .into_iter()
                        .filter(|&p| p - re[t] <= grid_max + 1e-12)
                        .collect()
                })
                .collect();
            for_each_combo(&choices, |pick| {
                // expand shared-breakpoint outputs
                let out_choices: Vec<Vec<f64>> = pick.iter().map(|&p| outputs(p)).collect();
                let fixed_cost: f64 = others.iter().zip(pick).map(|(&t, &p)| cost(t, p)).sum();
                for_each_combo(&out_choices, |outs| {
                    let rest = demand / delta - outs.iter().sum::<f64>();
                    for s in SEGMENTS {
                        let p = (rest - s.3) / s.2;
                        let lo = s.0.max(0.19);
                        if p >= lo - 1e-9 && p <= s.1 + 1e-9 {
                            let p = p.clamp(lo, s.1);
                            if p - re[j] <= grid_max + 1e-12 {
                                consider(base_cost + fixed_cost + cost(j, p));
                            }
                        }
                    }
                });
            });
        }
    }
    best
}

/// Maximum output, kWh, over `n` steps of `delta` h when the grid energy
/// must total exactly `budget` kWh and renewable power `re` may be
/// curtailed. `None` when infeasible.
///
/// Grid power at a step ranges over `[max(0, P - re), P]`, so the budget is
/// reachable iff `sum max(0, P - re) <= budget / delta <= sum P`. As in
/// [`min_cost`], one input at most sits off a breakpoint; it is solved
/// from whichever side of the budget condition binds.
pub fn max_output(re: &[f64], delta: f64, budget: f64, grid_max: f64) -> Option<f64> {
    let n = re.len();
    let g = budget / delta;
    let mut best: Option<f64> = None;
    let feasible = |ps: &[f64]| {
        let lo: f64 = ps.iter().zip(re).map(|(p, r)| (p - r).max(0.0)).sum();
        let hi: f64 = ps.iter().map(|p| p.min(grid_max)).sum();
        let step_ok = ps.iter().zip(re).all(|(p, r)| p - r <= grid_max + 1e-9);
        step_ok && lo <= g + 1e-9 && g <= hi + 1e-9
    };
    let value = |ps: &[f64], states: &[u32]| -> f64 {
        ps.iter()
            .zip(states)
            .map(|(&p, &s)| {
                if s == OPERATION {
                    output(p).unwrap()
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            * delta
    };
    for seq in state_sequences(n) {
        let choices: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                if seq[t] == OPERATION {
                    breakpoints(&[re[t]])
                } else {
                    vec![fixed_input(seq[t])]
                }
            })
            .collect();
        let mut consider = |ps: &[f64]| {
            if feasible(ps) {
                let v = value(ps, &seq);
                if best.is_none_or(|b| v > b) {
                    best = Some(v);
                }
            }
        };
        for_each_combo(&choices, |pick| {
            consider(pick);
            // one free operating step solving either side of the budget
            for j in (0..n).filter(|&t| seq[t] == OPERATION) {
                let mut ps = pick.to_vec();
                let lo_others: f64 = (0..n)
                    .filter(|&t| t != j)
                    .map(|t| (ps[t] - re[t]).max(0.0))
                    .sum();
                let hi_others: f64 = (0..n).filter(|&t| t != j).map(|t| ps[t]).sum();
                for p in [re[j] + (g - lo_others), g - hi_others] {
                    if (0.19..=2.4).contains(&p) {
                        ps[j] = p;
                        consider(&ps);
                    }
                }
            }
        });
    }
    best
}
