//! The rolling two-stage loop: configuration, execution and its log.

mod config;
mod log;
mod run;

pub use self::config::{
    sub_seed, ConfigFile, ExperimentConfig, ForecastSection, LeadUnit, OutputConfig, PricesSection,
    SeedKey, SolverSection, SystemSection, TraceSection, TraceSource,
};
pub use self::log::{
    Event, EventKind, ExperimentLog, Failure, FailureKind, SolveRecord, Stage, TauLog, LOG_FILE,
};
pub use self::run::{
    conditions_from_plan, feedback_to_swo, relax_rto_on_infeasibility, run_experiment,
    run_experiment_observed, run_experiment_with, Progress,
};
