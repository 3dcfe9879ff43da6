//! Command-line front end.
//!
//! Exit codes: 0 converged, 1 I/O or other failure, 2 usage or config
//! error, 3 unstable policy, 4 iteration cap reached, 5 singularity,
//! 6 the DARE could not be solved.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::LqrError;
use commands::{cmd_analyze, cmd_reproduce, cmd_run, cmd_solve, termination_code, Figure};
use config::{ExperimentConfig, RawConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Solve(LqrError),
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Analysis(_) => 1,
            CliError::Solve(LqrError::NotConverged(_)) => 6,
            CliError::Solve(_) => 1,
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        match e {
            config::ConfigError::Read { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lqr-adp", version, about = "Value and policy iteration for discrete-time LQR")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (flat TOML)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named problem preset, e.g. paper-eq27
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the DARE and write a certificate report
    Solve(Common),
    /// Run one algorithm and write its trace CSV
    Run(Common),
    /// Regenerate the traces of a figure
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[command(flatten)]
        common: Common,
    },
    /// Contraction, ball-radius and ISS estimates
    Analyze(Common),
}

impl Common {
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        if let Some(p) = &self.preset {
            raw.preset = Some(p.clone());
            raw.problem_file = None;
            raw.a = None;
            raw.b = None;
            raw.q = None;
            raw.r = None;
        }
        raw.seed = self.seed.or(raw.seed);
        raw.max_iter = self.max_iter.or(raw.max_iter);
        raw.tol = self.tol.or(raw.tol);
        Ok(ExperimentConfig::from_raw(&raw)?)
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Solve(c) => {
            let (sol, _) = cmd_solve(&c.experiment()?, &c.out)?;
            println!("residual {:e} after {} iterations", sol.residual, sol.iterations_used);
            Ok(0)
        }
        Command::Run(c) => {
            let run = cmd_run(&c.experiment()?, &c.out)?;
            println!("{} after {} records", run.trace.termination, run.trace.len());
            Ok(termination_code(run.trace.termination))
        }
        Command::Reproduce { figure, common } => {
            for e in cmd_reproduce(*figure, &common.out, common.max_iter)? {
                println!("{} {} {}", e.curve_id, e.file, e.reason);
            }
            Ok(0)
        }
        Command::Analyze(c) => {
            print!("{}", cmd_analyze(&c.experiment()?, &c.out)?.render());
            Ok(0)
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
