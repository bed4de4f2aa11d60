use thiserror::Error;

use crate::milp::SolveStatus;

/// Errors raised across the crate.
///
/// Validation problems in a [`SystemSpec`](crate::model::SystemSpec) are not
/// errors: they are reported as data by
/// [`validate_system`](crate::model::validate_system).
#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} kW outside piecewise table range [{lower}, {upper}]")]
    OutOfRange { value: f64, lower: f64, upper: f64 },

    #[error("efficiency undefined: total input energy is zero")]
    UndefinedEfficiency,

    #[error("horizon error: {0}")]
    Horizon(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("{stage} model {status}: {detail}")]
    Stage {
        stage: &'static str,
        status: SolveStatus,
        detail: String,
    },

    #[error("extraction error: {0}")]
    Extraction(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True when the error came from an infeasible optimization stage.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Stage {
                status: SolveStatus::Infeasible,
                ..
            }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
