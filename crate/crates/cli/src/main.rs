//! `halving`: when will the next block-reward halving happen?

mod commands;
mod report;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use halving_core::sim::DEFAULT_SEED;
use halving_core::{CovarianceMode, Granularity, Timestamp};

#[derive(Parser)]
#[command(name = "halving", version, about = "Predict the time of the next block-reward halving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected halving time and confidence intervals.
    Predict(PredictArgs),
    /// Confidence intervals around a given expected time.
    Interval(IntervalArgs),
    /// Shift an expected time for a hashrate change.
    Adjust(AdjustArgs),
    /// Monte Carlo simulation of the retarget process.
    Simulate(SimulateArgs),
    /// Halving heights, subsidies and supply.
    Schedule(ScheduleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Naive,
    Retarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    /// Full retarget model, using the covariance mode.
    Full,
    /// First and last interval only; independent of the number of intervals.
    Simplified,
}

#[derive(Args)]
pub struct OutputArgs {
    /// Confidence levels, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.683, 0.955])]
    pub levels: Vec<f64>,
    /// Reference time for calendar output, e.g. 2016-06-02T23:50Z.
    #[arg(long)]
    pub now: Option<Timestamp>,
    /// Emit a single JSON object.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
#[command(group(
    ArgGroup::new("source")
        .required(true)
        .args(["height", "blocks_remaining", "snapshot", "endpoint"])
))]
pub struct PredictArgs {
    /// Current chain height.
    #[arg(long)]
    pub height: Option<u64>,
    /// Blocks left until the halving.
    #[arg(long)]
    pub blocks_remaining: Option<u64>,
    /// Header snapshot file (one JSON header per line).
    #[arg(long, value_name = "FILE")]
    pub snapshot: Option<PathBuf>,
    /// Headers endpoint base URL; without a value, HALVING_ENDPOINT is used.
    #[arg(long, value_name = "URL", num_args = 0..=1, default_missing_value = "")]
    pub endpoint: Option<String>,
    /// Headers to request from the endpoint.
    #[arg(long, default_value_t = 2016)]
    pub window: usize,
    #[arg(long, env = "HALVING_TIMEOUT_SECS", default_value_t = 30.0)]
    pub timeout_secs: f64,
    #[arg(long, value_enum, default_value_t = ModelArg::Retarget)]
    pub model: ModelArg,
    /// Retarget variance formula [default: simplified, or full when --covariance is given].
    #[arg(long, value_enum)]
    pub variance: Option<VarianceArg>,
    /// Adjacent-interval covariance for the full variance: derived or paper.
    #[arg(long)]
    pub covariance: Option<CovarianceMode>,
    /// Blocks per retarget interval.
    #[arg(long, default_value_t = 2016)]
    pub k: u32,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args)]
pub struct IntervalArgs {
    /// Expected time to the halving, in minutes.
    #[arg(long)]
    pub eta_minutes: f64,
    /// Standard deviation in minutes [default: sqrt(10 * eta)].
    #[arg(long)]
    pub stddev_minutes: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args)]
#[command(group(ArgGroup::new("base").required(true).args(["eta_minutes", "eta_at"])))]
#[command(group(ArgGroup::new("change").required(true).args(["step", "gradual", "step_near"])))]
pub struct AdjustArgs {
    /// Base expected time to the halving, in minutes.
    #[arg(long, allow_hyphen_values = true)]
    pub eta_minutes: Option<f64>,
    /// Base expected halving time; needs --now.
    #[arg(long, requires = "now")]
    pub eta_at: Option<Timestamp>,
    /// Standard deviation of the base prediction [default: sqrt(10 * eta)].
    #[arg(long)]
    pub stddev_minutes: Option<f64>,
    /// Step change well before the halving, as a fraction (0.1 = +10%).
    #[arg(long, allow_hyphen_values = true)]
    pub step: Option<f64>,
    /// Gradual change from the first hashrate to the second.
    #[arg(long, num_args = 2, value_names = ["OLD", "NEW"])]
    pub gradual: Option<Vec<f64>>,
    /// Step change inside the final interval: fraction and blocks remaining.
    #[arg(long, num_args = 2, value_names = ["FRACTION", "BLOCKS"], allow_hyphen_values = true)]
    pub step_near: Option<Vec<String>>,
    #[arg(long, default_value_t = 2016)]
    pub k: u32,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Blocks per retarget interval (at least 3).
    #[arg(long, default_value_t = 2016)]
    pub k: u32,
    /// Retarget intervals until the halving, counting the current one.
    #[arg(long)]
    pub n: u32,
    /// Blocks into the final interval at which the halving lands.
    #[arg(long = "M", visible_alias = "m", value_name = "M")]
    pub m: u32,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// per_interval (Gamma draws) or per_block (exponential draws).
    #[arg(long, default_value = "per_interval")]
    pub granularity: Granularity,
    /// Keep the initial difficulty throughout.
    #[arg(long)]
    pub no_retarget: bool,
    /// Write one simulated halving time per line; "-" for stdout.
    #[arg(long, value_name = "PATH")]
    pub emit_raw: Option<PathBuf>,
    /// Worker threads [default: all cores]. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct ScheduleArgs {
    /// Last epoch to list.
    #[arg(long, default_value_t = 4)]
    pub epochs: u64,
    #[arg(long)]
    pub json: bool,
}

/// Everything a command prints, assembled before anything is written.
#[derive(Default)]
pub struct Output {
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
}

fn run(cli: Cli) -> anyhow::Result<Output> {
    match cli.command {
        Command::Predict(a) => commands::predict(&a),
        Command::Interval(a) => commands::interval(&a),
        Command::Adjust(a) => commands::adjust(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Schedule(a) => commands::schedule(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("error: invalid arguments");
            eprintln!("{first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(out) => {
            let _ = io::stderr().write_all(&out.stderr);
            if io::stdout().write_all(&out.stdout).and_then(|_| io::stdout().flush()).is_err() {
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
