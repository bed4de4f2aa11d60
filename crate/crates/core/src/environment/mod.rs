//! Exogenous data and the simulated plant: renewable traces, forecasts
//! with lead-dependent error, prices, and a fleet that executes setpoints.

mod forecast;
mod plant;
mod prices;
mod trace;
mod transport;

pub use forecast::{
    aggregate_mean, keyed_normal, make_forecast, ErrorSide, ForecastModel, ForecastSeries,
    WORDS_PER_VALUE,
};
pub use plant::{Measurement, PlantLink, PlantRequest, PlantSim, RealizedPoint, Setpoint};
pub use prices::load_prices;
pub use trace::{downsample, load_trace, ActualSeries, SyntheticTrace};
pub use transport::{serve_plant, TcpPlantClient};
