//! `hdi`: runs the convergence, near-field and solver studies from
//! `key = value` config files and writes CSV tables.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdi_core::HdiError;

mod commands;
mod config;
mod output;

use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad config, unknown names, unreadable files. Exit code 1.
    Validation(String),
    /// Solver breakdown or a failed check. Exit code 2.
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<HdiError> for CliError {
    fn from(e: HdiError) -> Self {
        match e {
            HdiError::InvalidInput(_)
            | HdiError::UnknownName { .. }
            | HdiError::Io(_)
            | HdiError::Parse(_)
            | HdiError::OrderTooHigh { .. }
            | HdiError::GridTooSmall { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hdi", version, about = "Boundary integral convergence and solver studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (`key = value` per line, `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set ladder=20,40,80`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// 2D operator convergence against a refined-grid run.
    #[command(name = "converge-2d")]
    Converge2d(Common),
    /// 2D layer potentials near the boundary with error grids.
    #[command(name = "nearfield-2d")]
    Nearfield2d(Common),
    /// 3D Green's formula residuals over a grid ladder.
    #[command(name = "green-3d")]
    Green3d(Common),
    /// 3D exterior Neumann solve for a point-source field.
    #[command(name = "solve-neumann-3d")]
    SolveNeumann3d(Common),
    /// 2D Dirichlet density solve.
    #[command(name = "solve-dirichlet-2d")]
    SolveDirichlet2d(Common),
    /// Operator identity checks.
    Identities(Common),
    /// 3D interpolation matrix determinant check.
    #[command(name = "determinant-3d")]
    Determinant3d(Common),
    /// 3D interpolant vanishing-order slopes.
    #[command(name = "vanishing-3d")]
    Vanishing3d(Common),
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("HDI_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Validation(format!("HDI_THREADS = '{v}' is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn load(common: &Common, name: &str) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for s in &common.set {
        cfg.set(s)?;
    }
    cfg.check_experiment(name)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (common, name, f): (&Common, &str, fn(&ExperimentConfig) -> Result<(), CliError>) = match &cli.command {
        Command::Converge2d(c) => (c, "converge-2d", commands::converge_2d_cmd),
        Command::Nearfield2d(c) => (c, "nearfield-2d", commands::nearfield_2d_cmd),
        Command::Green3d(c) => (c, "green-3d", commands::green_3d_cmd),
        Command::SolveNeumann3d(c) => (c, "solve-neumann-3d", commands::solve_neumann_3d_cmd),
        Command::SolveDirichlet2d(c) => (c, "solve-dirichlet-2d", commands::solve_dirichlet_2d_cmd),
        Command::Identities(c) => (c, "identities", commands::identities_cmd),
        Command::Determinant3d(c) => (c, "determinant-3d", commands::determinant_3d_cmd),
        Command::Vanishing3d(c) => (c, "vanishing-3d", commands::vanishing_3d_cmd),
    };
    f(&load(common, name)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hdi: {e}");
            ExitCode::from(e.code())
        }
    }
}
