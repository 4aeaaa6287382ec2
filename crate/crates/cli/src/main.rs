use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "blindsearch",
    version,
    about = "Expected hitting times of blind search processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Domain size.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// harmonic | pow2 | uniform | adversarial:B=<f> | adversarial:B=n^<k> | file:<path>
    #[arg(long, global = true, default_value = "harmonic")]
    pub dist: String,
    #[arg(long, global = true, env = "BLINDSEARCH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 100_000)]
    pub runs: u64,
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Per-run step limit; runs that hit it are reported as censored.
    #[arg(long, global = true)]
    pub max_steps: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Raise or lower the largest n accepted by the exact engines.
    #[arg(long, global = true)]
    pub n_cap_override: Option<usize>,
    /// Scalar type for every subcommand except optimize and continuous.
    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
    Ext,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessArg {
    R,
    S,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full,
    Interval,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact T_a and uniform-start expectations.
    Exact {
        /// Also write the distribution as JSON to this path.
        #[arg(long)]
        emit_dist: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the expected hitting time.
    Simulate {
        #[arg(long, value_enum, default_value_t = ProcessArg::R)]
        process: ProcessArg,
    },
    /// Per-state expected potential drop.
    Potential,
    /// Lower bound, exact value and upper bound side by side.
    Bounds,
    /// Search for a distribution with small expected hitting time.
    Optimize {
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
        #[arg(long, default_value_t = blindsearch::optimize::DEFAULT_ITERS)]
        iters: usize,
        /// Also write the best distribution as JSON to this path.
        #[arg(long)]
        emit_dist: Option<PathBuf>,
    },
    /// Continuous search on [0, 1] over a list of precisions.
    Continuous {
        /// Comma-separated minimum perturbation sizes; defaults to 2^-5..2^-12.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, default_value_t = blindsearch::continuous::DEFAULT_OPTIMUM)]
        x0: f64,
    },
    /// Exact values and bounds for n = 2^k over a range of k.
    Scaling {
        #[arg(long, default_value_t = 4)]
        n_min_exp: u32,
        #[arg(long, default_value_t = 14)]
        n_max_exp: u32,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn run(cli: &Cli) -> blindsearch::Result<()> {
    let c = &cli.common;
    let output = match &cli.command {
        Command::Exact { emit_dist } => commands::exact(c, emit_dist.as_deref())?,
        Command::Simulate { process } => commands::simulate(c, *process)?,
        Command::Potential => commands::potential(c)?,
        Command::Bounds => commands::bounds(c)?,
        Command::Optimize {
            mode,
            iters,
            emit_dist,
        } => commands::optimize(c, *mode, *iters, emit_dist.as_deref())?,
        Command::Continuous { eps, x0 } => commands::continuous(c, eps, *x0)?,
        Command::Scaling {
            n_min_exp,
            n_max_exp,
        } => commands::scaling(c, *n_min_exp, *n_max_exp)?,
    };
    // everything is rendered before the first byte is written
    for (path, bytes) in &output.side_files {
        std::fs::write(path, bytes)?;
    }
    match &c.out {
        Some(path) => std::fs::write(path, &output.primary)?,
        None => std::io::stdout().lock().write_all(&output.primary)?,
    }
    Ok(())
}
