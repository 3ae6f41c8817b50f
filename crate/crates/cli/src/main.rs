//! `compsep`: simulate archives, solve β sequences and sweep recycling parameters.
//!
//! Exit codes: 0 success, 1 solver failure (non-convergence under the abort policy or a
//! numerical breakdown), 2 invalid configuration, input or I/O.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use compsep_core::driver::{FailurePolicy, InitialGuess};
use compsep_core::recycling::RecycleMethod;
use compsep_core::solvers::DeflationVariant;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Core(#[from] compsep_core::Error),
}

impl CliError {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            field,
            reason: reason.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        use compsep_core::Error as E;
        match self {
            CliError::Invalid { .. } => 2,
            CliError::Core(
                E::InvalidParameter { .. }
                | E::InvalidConfiguration(_)
                | E::DimensionMismatch { .. }
                | E::Format { .. }
                | E::Io { .. },
            ) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "compsep", version, about = "Recycled PCG solvers for component-separation sequences")]
struct Cli {
    /// TOML run configuration; its values override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a multi-frequency archive.
    Simulate {
        /// Output directory of the archive.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Square patch side in pixels.
        #[arg(long)]
        patch: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve the systems of a β sequence and write residual histories and a summary.
    Solve {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Run zero, continuation, adapted and adapted+ritz instead of a single strategy.
        #[arg(long)]
        compare: bool,
    },
    /// Sweep `k` and `dim_p` over the first ten systems.
    Sweep {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long = "k-list", value_delimiter = ',')]
        k_list: Option<Vec<usize>>,
        #[arg(long = "dimp-list", value_delimiter = ',')]
        dimp_list: Option<Vec<usize>>,
    },
}

#[derive(Debug, Args)]
struct IoArgs {
    /// Archive directory written by `simulate`.
    #[arg(long)]
    archive: Option<PathBuf>,
    /// CSV with header `beta_d,beta_s`.
    #[arg(long)]
    betas: Option<PathBuf>,
    /// Report directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, value_enum)]
    guess: Option<GuessArg>,
    #[arg(long, value_enum)]
    recycling: Option<RecyclingArg>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Augment recycled vectors with their spin-2 rotations.
    #[arg(long)]
    rotation: bool,
    /// Re-project residuals against the deflation space every iteration.
    #[arg(long)]
    reorthogonalize: bool,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    maxit: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "dim-p")]
    dim_p: Option<usize>,
    /// Keep going after a system fails to converge.
    #[arg(long = "continue-on-failure")]
    continue_on_failure: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GuessArg {
    Zero,
    Continuation,
    Adapted,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RecyclingArg {
    Off,
    Ritz,
    Harmonic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Def1,
    Adef2,
}

impl IoArgs {
    fn apply(self, cfg: &mut RunConfig) {
        cfg.paths.archive = self.archive;
        cfg.paths.betas = self.betas;
        cfg.paths.output = self.output;
    }
}

impl SolverArgs {
    fn apply(self, cfg: &mut RunConfig) {
        cfg.strategy.guess = self.guess.map(|g| match g {
            GuessArg::Zero => InitialGuess::Zero,
            GuessArg::Continuation => InitialGuess::Continuation,
            GuessArg::Adapted => InitialGuess::Adapted,
        });
        cfg.strategy.recycling = self.recycling.map(|r| match r {
            RecyclingArg::Off => RecycleMethod::Off,
            RecyclingArg::Ritz => RecycleMethod::Ritz,
            RecyclingArg::Harmonic => RecycleMethod::Harmonic,
        });
        cfg.strategy.variant = self.variant.map(|v| match v {
            VariantArg::Def1 => DeflationVariant::Def1,
            VariantArg::Adef2 => DeflationVariant::Adef2,
        });
        cfg.strategy.rotation = self.rotation.then_some(true);
        cfg.strategy.reorthogonalize = self.reorthogonalize.then_some(true);
        cfg.solver.tol = self.tol;
        cfg.solver.maxit = self.maxit;
        cfg.solver.k = self.k;
        cfg.solver.dim_p = self.dim_p;
        cfg.solver.policy = self.continue_on_failure.then_some(FailurePolicy::Continue);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    let mut compare = false;
    let sub = match cli.command {
        Command::Simulate { output, patch, seed } => {
            cfg.paths.output = output;
            if let Some(p) = patch {
                cfg.simulation.insert("patch_rows".into(), toml::Value::Integer(p as i64));
                cfg.simulation.insert("patch_cols".into(), toml::Value::Integer(p as i64));
            }
            cfg.seed = seed;
            "simulate"
        }
        Command::Solve { io, solver, compare: c } => {
            io.apply(&mut cfg);
            solver.apply(&mut cfg);
            compare = c;
            "solve"
        }
        Command::Sweep {
            io,
            solver,
            k_list,
            dimp_list,
        } => {
            io.apply(&mut cfg);
            solver.apply(&mut cfg);
            cfg.sweep.k = k_list;
            cfg.sweep.dim_p = dimp_list;
            "sweep"
        }
    };
    if let Some(path) = &cli.config {
        cfg.overlay(RunConfig::load(path)?);
    }
    match sub {
        "simulate" => commands::simulate(&cfg),
        "solve" => commands::solve(&cfg, compare),
        _ => commands::sweep(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
