//! Solver-neutral linear models, the HiGHS backend and the encodings of
//! resources, power balance and demand.

mod encode;
mod model;
mod solve;

pub use encode::{
    encode_balance, encode_demand, encode_demand_over, encode_resource, BalanceVars, ResourceVars,
    Role, VarMap,
};
pub use model::{
    Constraint, ConstraintSense, Direction, ModelHandle, Objective, VarId, VarKind, Variable,
};
pub use solve::{
    solve, HighsBackend, MilpBackend, Solution, SolveOptions, SolveStatus, DEFAULT_GAP,
    FEASIBILITY_TOL, INTEGRALITY_TOL,
};
