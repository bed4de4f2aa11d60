use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::info;
use twostage::environment::{
    aggregate_mean, make_forecast, serve_plant, PlantLink, PlantRequest, PlantSim, TcpPlantClient,
};
use twostage::error::Error;
use twostage::model::Level;
use twostage::orchestrator::{
    conditions_from_plan, run_experiment_observed, run_experiment_with, sub_seed, ExperimentConfig,
    ExperimentLog, FailureKind, Progress, SeedKey, LOG_FILE,
};
use twostage::report::{compute_metrics, write_report};
use twostage::stages::{
    solve_rto, solve_swo, write_plan_csv, write_sos_csv, FixedHistory, Plan, RtoProblem, SoS,
    SwoProblem,
};

const PLANT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Parser)]
#[command(
    name = "twostage",
    version,
    about = "Two-stage rolling optimization of grid- and wind-fed electrolyzers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::from_file(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full experiment and write the log, stage CSVs and report.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory (default: the configured one, else `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where the figure CSVs go (default: the configured one, else the
        /// output directory).
        #[arg(long)]
        figures_dir: Option<PathBuf>,
        /// Drive a plant served over TCP instead of the built-in one.
        #[arg(long, value_name = "ADDR")]
        plant: Option<String>,
    },
    /// Solve one SWO over the whole horizon.
    Swo {
        #[command(flatten)]
        common: Common,
        /// Realized coarse steps to pin, as JSON (`{"steps": [...]}`).
        #[arg(long)]
        history: Option<PathBuf>,
        /// Plan output (JSON); a CSV is written next to it.
        #[arg(long, default_value = "plan.json")]
        out: PathBuf,
    },
    /// Solve one RTO for a coarse step of a plan.
    Rto {
        #[command(flatten)]
        common: Common,
        /// Plan produced by `swo`.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        tau: usize,
        /// Setpoints output (JSON); a CSV is written next to it.
        #[arg(long, default_value = "sos.json")]
        out: PathBuf,
    },
    /// Replay setpoints through the simulated plant, or serve it over TCP.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Setpoints produced by `rto`.
        #[arg(long, required_unless_present = "serve")]
        sos: Option<PathBuf>,
        /// Measurements output (JSON).
        #[arg(long, default_value = "measurements.json")]
        out: PathBuf,
        /// Serve the plant on this address until the client disconnects.
        #[arg(long, value_name = "ADDR", conflicts_with = "sos")]
        serve: Option<String>,
    },
    /// Compute metrics and figure CSVs from an experiment log.
    Report {
        /// Experiment log (default: `experiment_log.json` in the configured
        /// output directory).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        figures_dir: Option<PathBuf>,
    },
}

/// Exit status for an error: 2 configuration, 3 infeasible, 4 transport,
/// 5 anything else.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ if e.is_infeasible() => 3,
        Error::Transport(_) => 4,
        _ => 5,
    }
}

fn kind(code: u8) -> &'static str {
    match code {
        2 => "config",
        3 => "infeasible",
        4 => "transport",
        _ => "internal",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={} message={msg}", kind(code));
            ExitCode::from(code)
        }
    }
}

/// Reads a JSON input file; failures are configuration errors.
fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn print_progress(p: &Progress<'_>) {
    println!("{}", p.line());
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            common,
            out,
            figures_dir,
            plant,
        } => {
            let cfg = common.load()?;
            let out = out
                .or_else(|| cfg.output.dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let figures = figures_dir
                .or_else(|| cfg.output.figures_dir.clone())
                .unwrap_or_else(|| out.clone());
            let log = match plant {
                None => run_experiment_observed(&cfg, print_progress)?,
                Some(addr) => {
                    let mut link = TcpPlantClient::connect(addr.as_str(), PLANT_TIMEOUT)?;
                    run_experiment_with(&cfg, &mut link, print_progress)?
                }
            };
            log.write_artifacts(&out)?;
            info!("log written to {}", out.join(LOG_FILE).display());
            if let Some(f) = &log.failure {
                let code = match f.kind {
                    FailureKind::Infeasible => 3,
                    FailureKind::Transport => 4,
                    FailureKind::Internal => 5,
                };
                eprintln!(
                    "error kind={} message={}",
                    kind(code),
                    f.message.replace('\n', " ")
                );
                std::process::exit(i32::from(code));
            }
            let report = compute_metrics(&log)?;
            write_report(&log, &report, &figures)?;
            println!("{}", report.summary());
            Ok(())
        }
        Command::Swo {
            common,
            history,
            out,
        } => {
            let cfg = common.load()?;
            let history: FixedHistory = match history {
                Some(p) => read_json(&p)?,
                None => FixedHistory::default(),
            };
            let grid = cfg.grid;
            let actual = cfg.actual_series()?;
            let issue = grid.global_index(history.len().min(grid.n_swo), 0);
            let fc = make_forecast(
                &actual,
                issue,
                grid.total_rto_steps() - issue,
                &cfg.forecast,
                sub_seed(cfg.seed, SeedKey::Forecast),
            )?;
            let mut re = aggregate_mean(&actual.values[..issue], grid.n_rto);
            re.extend(aggregate_mean(&fc.values, grid.n_rto));
            let plan = solve_swo(
                &SwoProblem {
                    spec: &cfg.system,
                    grid: &grid,
                    prices: &cfg.prices,
                    re_forecast: &re,
                    history: &history,
                    initial: None,
                    demand_penalty: None,
                },
                cfg.gap,
            )?;
            println!(
                "SWO tau={} status={} obj={:.4} cost={:.4} EUR",
                plan.issue, plan.status, plan.objective, plan.cost_eur
            );
            write_json(&out, &plan)?;
            let mut csv = Vec::new();
            write_plan_csv(&mut csv, &plan)?;
            fs::write(out.with_extension("csv"), csv)?;
            Ok(())
        }
        Command::Rto {
            common,
            plan,
            tau,
            out,
        } => {
            let cfg = common.load()?;
            let plan: Plan = read_json(&plan)?;
            let grid = cfg.grid;
            if tau >= grid.n_swo {
                return Err(Error::Config(format!(
                    "tau {tau} outside the {}-step horizon",
                    grid.n_swo
                )));
            }
            let plan_step = plan
                .step(tau)
                .ok_or_else(|| Error::Config(format!("plan has no step {tau}")))?;
            let actual = cfg.actual_series()?;
            let issue = grid.global_index(tau, 0);
            let fc = make_forecast(
                &actual,
                issue,
                grid.n_rto,
                &cfg.forecast,
                sub_seed(cfg.seed, SeedKey::Forecast),
            )?;
            let initial = conditions_from_plan(&plan, &cfg.system, grid.n_rto, tau);
            let sos = solve_rto(
                &RtoProblem {
                    spec: &cfg.system,
                    grid: &grid,
                    plan_step,
                    tau,
                    re_forecast: &fc.values,
                    history: &FixedHistory::default(),
                    initial: Some(&initial),
                    pin_states: true,
                    slack_penalty: None,
                },
                cfg.gap,
            )?;
            println!(
                "RTO tau={tau} status={} obj={:.4} budget={:.4} kWh",
                sos.status, sos.objective, sos.budget_kwh
            );
            write_json(&out, &sos)?;
            let mut csv = Vec::new();
            write_sos_csv(&mut csv, &sos)?;
            fs::write(out.with_extension("csv"), csv)?;
            Ok(())
        }
        Command::Simulate {
            common,
            sos,
            out,
            serve,
        } => {
            let cfg = common.load()?;
            let mut plant = PlantSim::new(cfg.system.clone(), cfg.actual_series()?)
                .with_input_noise(cfg.plant_input_noise_kw, sub_seed(cfg.seed, SeedKey::Plant));
            if let Some(addr) = serve {
                let listener = TcpListener::bind(addr.as_str())
                    .map_err(|e| Error::Transport(format!("bind {addr}: {e}")))?;
                eprintln!("serving plant on {}", listener.local_addr()?);
                return serve_plant(&listener, &mut plant, Some(1));
            }
            let sos: SoS = read_json(sos.as_deref().expect("clap requires --sos"))?;
            let delta = cfg.grid.delta(Level::Rto);
            let mut measurements = Vec::new();
            for (k, step) in sos.trajectory.steps.iter().enumerate() {
                let request = PlantRequest::from_step(cfg.grid.global_index(sos.tau, k), step);
                measurements.push(plant.exchange(&request)?);
            }
            let output: f64 = measurements
                .iter()
                .flat_map(|m| m.resources.iter().map(|p| p.p_output))
                .sum::<f64>()
                * delta;
            let rejected = measurements.iter().filter(|m| m.any_rejected()).count();
            println!(
                "simulated {} steps: output {output:.4} kWh, {rejected} with rejected states",
                measurements.len()
            );
            write_json(&out, &measurements)
        }
        Command::Report {
            log,
            config,
            figures_dir,
        } => {
            let (log_path, configured) = match (log, config) {
                (Some(p), _) => (p, None),
                (None, Some(c)) => {
                    let cfg = ExperimentConfig::from_file(&c)?;
                    let dir = cfg
                        .output
                        .dir
                        .clone()
                        .unwrap_or_else(|| PathBuf::from("out"));
                    (dir.join(LOG_FILE), cfg.output.figures_dir)
                }
                (None, None) => return Err(Error::Config("report needs --log or --config".into())),
            };
            let log: ExperimentLog = read_json(&log_path)?;
            let report = compute_metrics(&log)?;
            let figures = figures_dir.or(configured).unwrap_or_else(|| {
                log_path
                    .parent()
                    .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
            });
            write_report(&log, &report, &figures)?;
            println!("{}", report.summary());
            Ok(())
        }
    }
}
