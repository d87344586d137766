//! `gflow`: run trajectories, convergence studies and inequality checks for
//! variational time-stepping schemes.

mod chart;
mod commands;
mod config;
mod error;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gflow_core::model::Scheme;

use crate::commands::{dispatch, CheckTask, ConvergeTask, RunTask};
use crate::config::{parse_scheme, ExperimentConfig, FileConfig, Overrides, Section, Space};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "gflow", version, about = "Minimizing-movement and BDF2 experiments on metric gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trajectories and write one CSV per scheme and step size.
    Run(CommonArgs),
    /// Run a convergence study and write convergence.csv, convergence.svg and diagnostics.csv.
    Converge(CommonArgs),
    /// Verify the discrete energy and EVI inequalities; exits 1 on any failure.
    Check(CheckArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// One of sphere, hilbert-rd, wasserstein-icdf, halfline.
    #[arg(long)]
    space: Option<Space>,
    /// Comma-separated schemes (mm, bdf2).
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    scheme: Option<Vec<Scheme>>,
    /// Comma-separated step sizes, largest first.
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    #[arg(long)]
    tau_ref: Option<f64>,
    #[arg(long)]
    tau_coarse: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Number of grid points for hilbert-rd and wasserstein-icdf.
    #[arg(long)]
    grid_k: Option<usize>,
    /// Output directory.
    #[arg(long, env = "GFLOW_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of concurrent jobs.
    #[arg(long)]
    jobs: Option<usize>,
    /// TOML file with top-level settings and one section per space.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Check a trajectory file written by `run` instead of computing one.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(self) -> Result<ExperimentConfig, CliError> {
        let file = self.config.as_deref().map(FileConfig::load).transpose()?;
        let overrides = Overrides {
            space: self.space,
            schemes: self.scheme,
            section: Section {
                tau_ref: self.tau_ref,
                tau: self.tau,
                tau_coarse: self.tau_coarse,
                t_final: self.t_final,
                grid_k: self.grid_k,
            },
            out: self.out,
            seed: self.seed,
            jobs: self.jobs,
        };
        ExperimentConfig::resolve(file.as_ref(), overrides)
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            for path in dispatch(&cfg, RunTask { cfg: &cfg })? {
                println!("wrote {}", path.display());
            }
        }
        Command::Converge(args) => {
            let cfg = args.resolve()?;
            let summary = dispatch(&cfg, ConvergeTask { cfg: &cfg })?;
            for line in &summary.lines {
                println!("{line}");
            }
            for path in &summary.files {
                println!("wrote {}", path.display());
            }
            if !summary.diagnostics_passed {
                println!("some inequality checks failed; see diagnostics.csv");
            }
        }
        Command::Check(args) => {
            let cfg = args.common.resolve()?;
            let summary = dispatch(
                &cfg,
                CheckTask {
                    cfg: &cfg,
                    trajectory: args.trajectory.as_deref(),
                },
            )?;
            print!("{}", summary.table());
            if let Some(failure) = summary.first_failure() {
                return Err(CliError::CheckFailed(failure));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gflow: {e}");
            e.exit_code()
        }
    }
}
