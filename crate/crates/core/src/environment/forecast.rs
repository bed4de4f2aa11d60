use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ActualSeries;

/// Words of ChaCha output reserved per forecast value.
pub const WORDS_PER_VALUE: u128 = 16;

/// Which way forecast errors may point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorSide {
    #[default]
    Both,
    /// Forecasts never exceed the actual value.
    Under,
    /// Forecasts never fall below the actual value.
    Over,
}

/// Multiplicative forecast error that widens with lead time.
///
/// The relative error at lead `L` steps is normal with standard deviation
/// `sigma0 + sigma1 * L / steps_per_lead`, and forecasts are clipped at
/// zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastModel {
    pub sigma0: f64,
    pub sigma1: f64,
    /// Series steps per unit of lead time in `sigma1`.
    #[serde(default = "one")]
    pub steps_per_lead: usize,
    #[serde(default)]
    pub side: ErrorSide,
}

fn one() -> usize {
    1
}

impl Default for ForecastModel {
    fn default() -> Self {
        ForecastModel {
            sigma0: 0.01,
            sigma1: 0.02,
            steps_per_lead: 1,
            side: ErrorSide::Both,
        }
    }
}

impl ForecastModel {
    pub fn perfect() -> Self {
        ForecastModel {
            sigma0: 0.0,
            sigma1: 0.0,
            ..Self::default()
        }
    }

    pub fn sigma(&self, lead: usize) -> f64 {
        self.sigma0 + self.sigma1 * lead as f64 / self.steps_per_lead.max(1) as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma0 >= 0.0 && self.sigma1 >= 0.0) {
            return Err(Error::Data(format!(
                "forecast sigmas must be non-negative, got {} and {}",
                self.sigma0, self.sigma1
            )));
        }
        if self.steps_per_lead == 0 {
            return Err(Error::Data("steps_per_lead must be positive".into()));
        }
        Ok(())
    }
}

/// Values issued at one time for the following steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    /// Series index at which the forecast was made.
    pub issue: usize,
    /// kW; `values[i]` is for series index `issue + i`
    pub values: Vec<f64>,
    /// Lead of each value in series steps.
    pub leads: Vec<usize>,
}

impl ForecastSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Standard normal draw for value `j` of the forecast issued at `issue`.
///
/// A ChaCha8 generator seeded with `seed` (via `seed_from_u64`) is moved to
/// stream `issue` and word position `j * WORDS_PER_VALUE`, and one
/// `StandardNormal` sample is drawn. Any single value can therefore be
/// regenerated without the others.
pub fn keyed_normal(seed: u64, issue: u64, j: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(issue);
    rng.set_word_pos(u128::from(j) * WORDS_PER_VALUE);
    StandardNormal.sample(&mut rng)
}

/// Forecast of `actual[issue..issue + horizon]` made at `issue`.
///
/// `forecast(j) = actual(j) * max(0, 1 + e_j)` where `e_j` is
/// `sigma(j - issue)` times [`keyed_normal`]`(seed, issue, j)`, folded to one
/// sign when the model asks for it. Lead 0 is the actual value.
pub fn make_forecast(
    actual: &ActualSeries,
    issue: usize,
    horizon: usize,
    model: &ForecastModel,
    seed: u64,
) -> Result<ForecastSeries> {
    model.validate()?;
    if issue + horizon > actual.len() {
        return Err(Error::Data(format!(
            "forecast for [{issue}, {}) past the end of a {}-step series",
            issue + horizon,
            actual.len()
        )));
    }
    let mut values = Vec::with_capacity(horizon);
    let mut leads = Vec::with_capacity(horizon);
    for j in issue..issue + horizon {
        let lead = j - issue;
        let truth = actual.values[j];
        let v = if lead == 0 {
            truth
        } else {
            let sigma = model.sigma(lead);
            let e = if sigma == 0.0 {
                0.0
            } else {
                let e = sigma * keyed_normal(seed, issue as u64, j as u64);
                match model.side {
                    ErrorSide::Both => e,
                    ErrorSide::Under => -e.abs(),
                    ErrorSide::Over => e.abs(),
                }
            };
            truth * (1.0 + e).max(0.0)
        };
        values.push(v);
        leads.push(lead);
    }
    Ok(ForecastSeries {
        issue,
        values,
        leads,
    })
}

/// Mean of each consecutive block of `factor` values; a trailing partial
/// block is averaged over its own length.
pub fn aggregate_mean(values: &[f64], factor: usize) -> Vec<f64> {
    values
        .chunks(factor.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}
