//! `euler1d`: simulate smooth Lagrangian Euler flows and check the bound
//! monitors against them.
//!
//! Exit status: 0 on success (and, for `verify`, when every check passes),
//! 1 when `verify` finds a violation, 2 on usage, configuration or input
//! errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use config::{parse_param, parse_seeds, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(euler1d_core::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<euler1d_core::Error> for CliError {
    fn from(e: euler1d_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

fn config_help() -> String {
    let mut s = String::from(
        "Config files hold one `key = value` per line; `#` starts a comment.\n\
         Command-line flags override file values. Keys:\n",
    );
    for (k, d) in config::CONFIG_KEYS {
        s.push_str(&format!("  {k:<14} {d}\n"));
    }
    s.push_str(
        "\nThe output directory is taken from --out, then EULER1D_OUT, then the file,\n\
         then ./euler1d-run.\n\nExit status: 0 success, 1 verification failure, 2 usage or input error.",
    );
    s
}

#[derive(Debug, Parser)]
#[command(
    name = "euler1d",
    version,
    about = "Lagrangian Euler laboratory: smooth solutions and bound monitors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the solver and write snapshots plus a run manifest.
    Simulate(RunArgs),
    /// Check a stored run (or a config, simulated first) against all monitors.
    Verify(VerifyArgs),
    /// Trace characteristics through a stored run and write path CSVs.
    Trace(TraceArgs),
    /// Fit the decay exponent of the minimum density of a stored run.
    Fit(FitArgs),
    /// Print the built-in scenarios.
    ListScenarios,
}

#[derive(Debug, Args, Default)]
struct RunArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario parameter override, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// CSV with columns x,u,eta[,m] (user_defined scenario).
    #[arg(long)]
    user_data: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Pressure constant K.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    c_v: Option<f64>,
    /// Number of cells.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_max: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Store snapshots at multiples of this time.
    #[arg(long)]
    interval: Option<f64>,
    /// Store every K-th step.
    #[arg(long)]
    stride: Option<usize>,
    /// Scaling exponent for the full-Euler monitors, in (0, 1/4).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output directory.
    #[arg(long, env = "EULER1D_OUT")]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            scenario: self.scenario.clone(),
            params: self.params.iter().map(|p| parse_param(p)).collect::<Result<_, _>>()?,
            user_data: self.user_data.clone(),
            gamma: self.gamma,
            k: self.k,
            c_v: self.c_v,
            n: self.n,
            x_min: self.x_min,
            x_max: self.x_max,
            cfl: self.cfl,
            t_end: self.t_end,
            interval: self.interval,
            stride: self.stride,
            epsilon: self.epsilon,
            out: self.out.clone(),
            seeds: Vec::new(),
        };
        Ok(base.merge(flags))
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Run directory, or a config file to simulate first.
    target: PathBuf,
    /// Scaling exponent in (0, 1/4); defaults to the run's value.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Use this slack for every check instead of a refinement study.
    #[arg(long)]
    slack: Option<f64>,
    /// Output directory when TARGET is a config file.
    #[arg(long, env = "EULER1D_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Forward,
    Backward,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Backward,
}

#[derive(Debug, Args)]
struct TraceArgs {
    /// Run directory.
    run: PathBuf,
    /// Seed point, repeatable; comma lists allowed.
    #[arg(long = "seed", allow_hyphen_values = true)]
    seeds: Vec<String>,
    #[arg(long, value_enum, default_value = "forward")]
    family: FamilyArg,
    /// Direction in time.
    #[arg(long, value_enum, default_value = "forward")]
    direction: DirectionArg,
    /// Start time (default: first stored time, or last for backward tracing).
    #[arg(long)]
    t0: Option<f64>,
    /// Carry the scaled gradients with this epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    /// RK4 steps per stored interval.
    #[arg(long, default_value_t = 2)]
    substeps: usize,
    /// Also estimate the gradient blowup time from compressive seeds.
    #[arg(long)]
    blowup: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Run directory.
    run: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    t_a: f64,
    #[arg(long, default_value_t = 50.0)]
    t_b: f64,
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(config_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Simulate(args) => args.resolve().and_then(|c| commands::simulate(&c)).map(|_| true),
        Command::Verify(args) => commands::verify(args),
        Command::Trace(args) => commands::trace(args).map(|_| true),
        Command::Fit(args) => commands::fit(args).map(|_| true),
        Command::ListScenarios => {
            commands::list_scenarios();
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn seeds_from(args: &[String]) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for s in args {
        out.extend(parse_seeds(s)?);
    }
    Ok(out)
}
