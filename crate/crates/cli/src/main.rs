//! `superbike`: sizing and energy-management studies for a two-wheel-driven
//! electric superbike.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod io;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::ModeArg;

#[derive(Parser, Debug)]
#[command(
    name = "superbike",
    version,
    about = "Powertrain co-design for a two-wheel-driven electric superbike"
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand; each overrides the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Vehicle parameters (TOML keyed by symbol name).
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Front motor model (TOML).
    #[arg(long, global = true)]
    pub front_motor: Option<PathBuf>,
    /// Rear motor model (TOML).
    #[arg(long, global = true)]
    pub rear_motor: Option<PathBuf>,
    /// Cycle CSV with columns t,v[,theta]; repeatable.
    #[arg(long, global = true)]
    pub cycle: Vec<PathBuf>,
    /// Bundled cycle: ece15, eudc, sprint or constant; repeatable.
    #[arg(long, global = true)]
    pub builtin: Vec<String>,
    /// Resample cycles to this step, s.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Output directory; the output file for `fit-map` and `gen-map`.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Optimality tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Treat simulation violations as errors.
    #[arg(long, global = true)]
    pub strict: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the sizing program on each cycle.
    Optimize,
    /// Simulate a design over each cycle.
    Simulate(SimulateArgs),
    /// Fit loss coefficients to a measured map.
    FitMap(FitMapArgs),
    /// Write a synthetic loss map, optionally with noise.
    GenMap(GenMapArgs),
    /// Solve both split strategies on every cycle and tabulate the differences.
    Compare,
    /// Write speed, power and split traces for plotting.
    PlotData(PlotDataArgs),
    /// Print a stored design summary or comparison.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Design summary written by `optimize` or `simulate`.
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long, requires_all = ["s_m", "s_b"], conflicts_with = "design")]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub s_m: Option<f64>,
    #[arg(long)]
    pub s_b: Option<f64>,
    /// `replay` uses the stored force trace when it fits the cycle.
    #[arg(long, value_enum, default_value_t = PolicyArg::Replay)]
    pub policy: PolicyArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Adherence,
    Replay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Machine {
    Front,
    Rear,
}

#[derive(Args, Debug)]
pub struct FitMapArgs {
    /// Loss map CSV with columns omega,torque,p_loss.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Machine::Rear)]
    pub machine: Machine,
}

#[derive(Args, Debug)]
pub struct GenMapArgs {
    #[arg(long, value_enum, default_value_t = Machine::Rear)]
    pub machine: Machine,
    /// Relative standard deviation of multiplicative Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 16)]
    pub n_omega: usize,
    #[arg(long, default_value_t = 12)]
    pub n_torque: usize,
}

#[derive(Args, Debug)]
pub struct PlotDataArgs {
    /// Trajectory CSV of the adherence-split design.
    #[arg(long)]
    pub fixed: PathBuf,
    /// Trajectory CSV of the free-split design.
    #[arg(long)]
    pub free: PathBuf,
    /// Window start, s.
    #[arg(long)]
    pub from: Option<f64>,
    /// Window end, s.
    #[arg(long)]
    pub to: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `compare.json` or a design summary.
    pub input: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Optimize => commands::optimize(&cli.run),
        Command::Simulate(a) => commands::simulate(&cli.run, a),
        Command::FitMap(a) => commands::fit_map(&cli.run, a),
        Command::GenMap(a) => commands::gen_map(&cli.run, a),
        Command::Compare => commands::compare(&cli.run),
        Command::PlotData(a) => commands::plot_data(&cli.run, a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
