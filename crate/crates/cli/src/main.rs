//! `spreadwave`: batch front-end for simulation, curve building,
//! calibration, horizon scaling and operating-spread optimization.

mod calibrate;
mod config;
mod curve;
mod failure;
mod optimize;
mod report;
mod scale;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Duration, FileConfig, Globals};
use failure::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "spreadwave",
    version,
    about = "Spread, volatility and volume models from the command line"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML run configuration; flags and SPREADWAVE_* variables override it.
    #[arg(long, global = true, env = "SPREADWAVE_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "SPREADWAVE_SEED")]
    pub seed: Option<u64>,
    /// Output directory, created if missing [default: out].
    #[arg(long, global = true, env = "SPREADWAVE_OUT")]
    pub out: Option<PathBuf>,
    /// Quantile level of the spread-volume curve [default: 0.9].
    #[arg(long, global = true, env = "SPREADWAVE_QUANTILE")]
    pub quantile: Option<f64>,
    /// Bar horizon: plain number in reference units, or with ms/s/m/h/d.
    #[arg(long, global = true, env = "SPREADWAVE_HORIZON", value_parser = Duration::parse)]
    pub horizon: Option<Duration>,
    /// Milliseconds per reference time unit [default: 1000].
    #[arg(long, global = true, env = "SPREADWAVE_TIME_UNIT_MS")]
    pub time_unit_ms: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate coupled-wave bars.
    Simulate(simulate::SimulateArgs),
    /// Build a spread-volume quantile curve from quotes or bars.
    Curve(curve::CurveArgs),
    /// Fit the spread law to a curve.
    Calibrate(calibrate::CalibrateArgs),
    /// Scale spreads across horizons, or tabulate the bar spread surface.
    Scale(scale::ScaleArgs),
    /// Optimal operating spread over a volume grid.
    Optimize(optimize::OptimizeArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.global.config.as_deref())?;
    let globals = Globals::resolve(&file, &cli.global)?;
    match &cli.command {
        Command::Simulate(a) => simulate::run(a, &file, &globals),
        Command::Curve(a) => curve::run(a, &file, &globals),
        Command::Calibrate(a) => calibrate::run(a, &file, &globals),
        Command::Scale(a) => scale::run(a, &file, &globals),
        Command::Optimize(a) => optimize::run(a, &file, &globals),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version go to stdout and succeed; usage errors are invalid input.
            return ExitCode::from(if e.use_stderr() {
                failure::ExitKind::Invalid as u8
            } else {
                0
            });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
