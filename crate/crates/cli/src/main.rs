use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dnm_cli::commands::{self, ReplayOptions};
use dnm_cli::{CliError, CliResult};
use dnm_core::engine::DEFAULT_WINDOW;

fn positive() -> clap::builder::RangedU64ValueParser<usize> {
    clap::builder::RangedU64ValueParser::new().range(1..)
}

/// Forecasting with discrete dynamic network models.
#[derive(Debug, Parser)]
#[command(name = "dnm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Replay {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Observation series CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Number of recent periods used to estimate mixture weights.
    #[arg(long, default_value_t = DEFAULT_WINDOW, value_parser = positive())]
    window: usize,
    /// Keep the weights given in the model file.
    #[arg(long)]
    fixed_alpha: bool,
}

impl Replay {
    fn options(&self) -> ReplayOptions {
        ReplayOptions { window: self.window, fixed_alpha: self.fixed_alpha }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Example {
    Carsales,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a model file compiles.
    Validate { model: PathBuf },
    /// Replay a series, printing weights and one-step-ahead forecasts.
    Backtest {
        #[command(flatten)]
        replay: Replay,
        /// Reported state per variable, e.g. `s=H,p=L` (default: first state).
        #[arg(long)]
        state_map: Option<String>,
    },
    /// Forecast marginals for the periods after the series ends.
    Forecast {
        #[command(flatten)]
        replay: Replay,
        #[arg(long, value_parser = positive())]
        horizon: usize,
    },
    /// Residual whiteness check of one-step-ahead forecasts.
    Diagnose {
        #[command(flatten)]
        replay: Replay,
        #[arg(long)]
        var: String,
        #[arg(long)]
        state: String,
        #[arg(long, default_value_t = 10, value_parser = positive())]
        maxlag: usize,
    },
    /// Forward-sample a series from a model.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = positive())]
        periods: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Write a bundled example model and series.
    Example {
        name: Example,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn load(replay: &Replay) -> CliResult<(dnm_core::dnm::CompiledDnm, dnm_core::engine::ObservationHistory)> {
    let model = commands::load_model(&read(&replay.model)?)?;
    let series = commands::load_series(&model, &read(&replay.data)?)?;
    Ok((model, series))
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Validate { model } => commands::validate(&read(&model)?),
        Command::Backtest { replay, state_map } => {
            let (model, series) = load(&replay)?;
            let designated = match &state_map {
                Some(text) => commands::parse_state_map(&model, text)?,
                None => Vec::new(),
            };
            commands::backtest(&model, &series, &designated, replay.options())
        }
        Command::Forecast { replay, horizon } => {
            let (model, series) = load(&replay)?;
            commands::forecast(&model, &series, horizon, replay.options())
        }
        Command::Diagnose { replay, var, state, maxlag } => {
            let (model, series) = load(&replay)?;
            commands::diagnose(&model, &series, &var, &state, maxlag, replay.options())
        }
        Command::Simulate { model, periods, seed } => {
            let model = commands::load_model(&read(&model)?)?;
            commands::simulate(&model, periods, seed)
        }
        Command::Example { name: Example::Carsales, out_dir } => {
            let (json, csv) = commands::carsales_example()?;
            fs::create_dir_all(&out_dir)?;
            let json_path = out_dir.join("carsales.json");
            let csv_path = out_dir.join("carsales.csv");
            fs::write(&json_path, json)?;
            fs::write(&csv_path, csv)?;
            Ok(format!("wrote {}\nwrote {}\n", json_path.display(), csv_path.display()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|()| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', "\nerror: "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
