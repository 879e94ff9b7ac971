mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

/// Exit codes are part of the interface.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_VERIFY_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "wallstrip",
    version,
    about = "Domain-wall minimizers on a thin-film strip",
    arg_required_else_help = true,
    after_help = "Exit codes: 0 success, 1 usage or input error, 2 not converged, 3 verification failed.\n\
                  WALL_THREADS caps the number of worker threads."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize the strip energy for one parameter set.
    #[command(allow_negative_numbers = true)]
    Solve(SolveArgs),
    /// Solve for a list of values of one parameter and tabulate the results.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Run the invariant suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Stop once the gradient norm falls below this.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Stop once the relative energy decrease per step falls below this.
    #[arg(long = "energy-tol")]
    pub energy_tol: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Starting field: linear_ramp or tanh_profile.
    #[arg(long, default_value = "linear_ramp")]
    pub init: String,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long, required = true)]
    pub gamma: f64,
    /// Applied field strength.
    #[arg(long, default_value_t = 0.0)]
    pub h: f64,
    /// Winding class: the wall runs from k*pi down to 0.
    #[arg(long, required = true)]
    pub k: i32,
    /// Half-width of the computational window.
    #[arg(long = "M", default_value_t = 10.0)]
    pub m: f64,
    #[arg(long, default_value_t = 401)]
    pub nx: usize,
    #[arg(long, default_value_t = 21)]
    pub ny: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for profile.csv, profile.json and report.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Gamma,
    Eps,
    #[value(name = "M")]
    M,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated list of values.
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub h: f64,
    #[arg(long, default_value_t = 1)]
    pub k: i32,
    /// Window half-width. A sweep over M keeps the x spacing of the base
    /// grid and adjusts nx.
    #[arg(long = "M", default_value_t = 10.0)]
    pub m: f64,
    #[arg(long, default_value_t = 401)]
    pub nx: usize,
    #[arg(long, default_value_t = 21)]
    pub ny: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// CSV output file; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Smaller grids and fewer samples.
    #[arg(long)]
    pub fast: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "inject-fault", hide = true)]
    pub inject_fault: Option<String>,
}

fn usage_error(msg: impl std::fmt::Display, sub: Option<&str>) -> ExitCode {
    eprintln!("error: {msg}\n");
    let mut cmd = Cli::command();
    cmd.build();
    let usage = match sub.and_then(|s| cmd.find_subcommand_mut(s)) {
        Some(c) => c.render_usage(),
        None => cmd.render_usage(),
    };
    eprintln!("{usage}");
    ExitCode::from(EXIT_USAGE)
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("WALL_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("WALL_THREADS={v:?} is not a thread count"))?;
    if n == 0 {
        return Err("WALL_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        return usage_error(e, None);
    }
    let (sub, result) = match cli.command {
        Command::Solve(a) => ("solve", commands::solve(&a)),
        Command::Sweep(a) => ("sweep", commands::sweep(&a)),
        Command::Verify(a) => ("verify", commands::verify(&a)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(commands::Failure::Usage(msg)) => usage_error(msg, Some(sub)),
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
