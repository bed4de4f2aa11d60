use std::path::{Path, PathBuf};

use log::warn;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{
    load_prices, load_trace, ActualSeries, ErrorSide, ForecastModel, SyntheticTrace,
};
use crate::error::{Error, Result};
use crate::milp::DEFAULT_GAP;
use crate::model::{validate_system, SystemSpec, TimeGrid};
use crate::stages::PriceSeries;

/// Streams of the top-level seed handed to each random consumer.
///
/// Sub-seed `i` is the first `u64` of a ChaCha8 generator seeded with the
/// top-level seed (via `seed_from_u64`) on stream `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedKey {
    Trace = 1,
    Forecast = 2,
    Plant = 3,
}

pub fn sub_seed(seed: u64, key: SeedKey) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key as u64);
    rng.next_u64()
}

/// Where the actual renewable power comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    /// Generated at the fine step from the trace sub-seed.
    Synthetic(SyntheticTrace),
    /// A series already on the fine step.
    Series(ActualSeries),
}

/// Everything one experiment needs, resolved and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub grid: TimeGrid,
    pub forecast: ForecastModel,
    pub trace: TraceSource,
    pub prices: PriceSeries,
    pub seed: u64,
    pub gap: f64,
    /// Price of relaxed coupling or demand slack: EUR per kWh of missed
    /// demand in the SWO, kWh of output per kWh of grid slack in the RTO.
    pub relaxation_penalty: f64,
    /// Uniform plant input perturbation, kW; zero disables it.
    pub plant_input_noise_kw: f64,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub figures_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Case-study settings with the given fleet and a synthetic trace.
    pub fn case_study(system: SystemSpec) -> Self {
        let grid = TimeGrid::case_study();
        ExperimentConfig {
            forecast: ForecastModel {
                steps_per_lead: grid.n_rto,
                ..ForecastModel::default()
            },
            prices: PriceSeries::constant(100.0, grid.n_swo),
            grid,
            system,
            trace: TraceSource::Synthetic(SyntheticTrace::default()),
            seed: 7,
            gap: DEFAULT_GAP,
            relaxation_penalty: 10.0,
            plant_input_noise_kw: 0.0,
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let report = validate_system(&self.system);
        if !report.is_valid() {
            return Err(Error::Config(format!("system: {report}")));
        }
        self.grid
            .validate()
            .map_err(|e| Error::Config(format!("time_grid: {e}")))?;
        if self.prices.len() != self.grid.n_swo {
            return Err(Error::Config(format!(
                "prices: {} values for {} SWO steps",
                self.prices.len(),
                self.grid.n_swo
            )));
        }
        if let TraceSource::Series(s) = &self.trace {
            if s.len() < self.grid.total_rto_steps() {
                return Err(Error::Config(format!(
                    "trace: {} values, experiment needs {}",
                    s.len(),
                    self.grid.total_rto_steps()
                )));
            }
            if (s.resolution_h - self.grid.delta_t).abs() > 1e-12 * self.grid.delta_t {
                return Err(Error::Config(format!(
                    "trace resolution {} h differs from the RTO step {} h",
                    s.resolution_h, self.grid.delta_t
                )));
            }
        }
        if !(self.gap >= 0.0) {
            return Err(Error::Config(format!(
                "solver: gap {} must be non-negative",
                self.gap
            )));
        }
        if !(self.relaxation_penalty >= 0.0) {
            return Err(Error::Config(format!(
                "solver: relaxation_penalty {} must be non-negative",
                self.relaxation_penalty
            )));
        }
        if self.relaxation_penalty == 0.0 {
            warn!("relaxation_penalty is 0: relaxed stages may draw slack for free");
        }
        if !(self.plant_input_noise_kw >= 0.0) {
            return Err(Error::Config(
                "plant_input_noise_kw must be non-negative".into(),
            ));
        }
        if !(self.forecast.sigma0 >= 0.0 && self.forecast.sigma1 >= 0.0)
            || self.forecast.steps_per_lead == 0
        {
            return Err(Error::Config(
                "forecast: sigmas must be non-negative and steps_per_lead positive".into(),
            ));
        }
        Ok(())
    }

    /// The actual renewable power on the fine grid, cut to the experiment.
    pub fn actual_series(&self) -> Result<ActualSeries> {
        let n = self.grid.total_rto_steps();
        let mut series = match &self.trace {
            TraceSource::Synthetic(gen) => {
                gen.generate(n, self.grid.delta_t, sub_seed(self.seed, SeedKey::Trace))?
            }
            TraceSource::Series(s) => s.clone(),
        };
        series.values.truncate(n);
        Ok(series)
    }

    /// Reads a configuration document; relative paths resolve against the
    /// document's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.resolve(base)
    }
}

/// The on-disk configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: u64,
    pub system: SystemSection,
    pub time_grid: TimeGrid,
    pub forecast: ForecastSection,
    pub prices: PricesSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemSection {
    Path(PathBuf),
    Inline(SystemSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeadUnit {
    /// `sigma1` grows per SWO step of lead.
    #[default]
    Swo,
    /// `sigma1` grows per RTO step of lead.
    Rto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSection {
    pub sigma0: f64,
    pub sigma1: f64,
    #[serde(default)]
    pub lead_unit: LeadUnit,
    #[serde(default)]
    pub side: ErrorSide,
    pub trace: TraceSection,
    #[serde(default)]
    pub plant_input_noise_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum TraceSection {
    Synthetic(SyntheticTrace),
    /// `time,power_kw` file, time in seconds.
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PricesSection {
    /// `tau,eur_per_mwh` file.
    Csv(PathBuf),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default = "default_penalty")]
    pub relaxation_penalty: f64,
}

fn default_gap() -> f64 {
    DEFAULT_GAP
}

fn default_penalty() -> f64 {
    10.0
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            gap: DEFAULT_GAP,
            relaxation_penalty: default_penalty(),
        }
    }
}

impl ConfigFile {
    pub fn resolve(self, base: &Path) -> Result<ExperimentConfig> {
        let at = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let system = match self.system {
            SystemSection::Inline(spec) => spec,
            SystemSection::Path(p) => {
                let p = at(&p);
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| Error::Config(format!("system {}: {e}", p.display())))?;
                SystemSpec::from_json(&text)
                    .map_err(|e| Error::Config(format!("system {}: {e}", p.display())))?
            }
        };
        let grid = self.time_grid;
        let trace = match self.forecast.trace {
            TraceSection::Synthetic(gen) => TraceSource::Synthetic(gen),
            TraceSection::Csv(p) => TraceSource::Series(
                load_trace(at(&p), grid.delta_t)
                    .map_err(|e| Error::Config(format!("trace {}: {e}", p.display())))?,
            ),
        };
        let prices = match self.prices {
            PricesSection::Values(v) => PriceSeries::new(v)?,
            PricesSection::Csv(p) => load_prices(at(&p))
                .map_err(|e| Error::Config(format!("prices {}: {e}", p.display())))?,
        };
        let steps_per_lead = match self.forecast.lead_unit {
            LeadUnit::Swo => grid.n_rto,
            LeadUnit::Rto => 1,
        };
        let output = OutputConfig {
            dir: self.output.dir.map(|d| at(&d)),
            figures_dir: self.output.figures_dir.map(|d| at(&d)),
        };
        let cfg = ExperimentConfig {
            system,
            forecast: ForecastModel {
                sigma0: self.forecast.sigma0,
                sigma1: self.forecast.sigma1,
                steps_per_lead,
                side: self.forecast.side,
            },
            trace,
            prices,
            seed: self.seed,
            gap: self.solver.gap,
            relaxation_penalty: self.solver.relaxation_penalty,
            plant_input_noise_kw: self.forecast.plant_input_noise_kw,
            output,
            grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
