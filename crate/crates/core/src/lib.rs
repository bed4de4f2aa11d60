//! Two-stage rolling-horizon scheduling of flexible loads fed by the grid
//! and a renewable source.
//!
//! A site-wide stage buys grid energy per coarse step at minimum cost; a
//! real-time stage spends exactly that energy per coarse step at fine
//! resolution, maximizing output. Both are mixed-integer linear programs
//! re-solved as forecasts and measurements arrive.
//!
//! - [`model`]: resources, the input-output map, trajectories and an
//!   independent rule checker.
//! - [`milp`]: model building and the solver backend.
//! - [`stages`]: the two optimization models.
//! - [`environment`]: traces, forecasts, prices and the plant.
//! - [`orchestrator`]: configuration, the rolling loop and its log.
//! - [`report`]: metrics and figure data.
//!
//! ```
//! use twostage::model::{SegmentTable, eval_piecewise};
//!
//! let out = eval_piecewise(2.4, &SegmentTable::electrolyzer()).unwrap();
//! assert!((out / 2.4 - 0.6225).abs() < 1e-12);
//! ```

// `!(x >= 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod environment;
pub mod error;
pub mod milp;
pub mod model;
pub mod orchestrator;
pub mod report;
pub mod stages;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/resources.md")]
    mod resources {}
    #[doc = include_str!("../../../book/src/stages.md")]
    mod stages {}
    #[doc = include_str!("../../../book/src/rolling.md")]
    mod rolling {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
}
