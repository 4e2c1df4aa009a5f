//! `resonance`: condition checks and Galerkin solves for resonant
//! semilinear Dirichlet problems.

mod commands;
mod config;
mod output;
mod reproduce;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::RunError;
use config::{resolve, ProblemConfig};
use output::Output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "resonance", version, about = "Condition checks and spectral Galerkin solves for -Δu - λ_k u + g(u) = f")]
struct Cli {
    /// Problem configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for report.json and CSV tables.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Override the truncation N.
    #[arg(long, global = true, value_name = "N")]
    n_trunc: Option<usize>,
    /// Solve without running the condition checks first.
    #[arg(long, global = true)]
    skip_conditions: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenpairs and the hat/bar/tilde decomposition.
    Eigen,
    /// Asymptotics of g and the LL, PLL and SC checks.
    Conditions,
    /// Conditions, then a multi-start critical point search.
    Solve,
    /// Run a canned example and check its expected verdicts.
    Reproduce {
        /// Example id; `list` prints the available ids.
        id: String,
    },
    /// Parse an expression and print its canonical form.
    ParseCheck {
        expr: String,
        /// Parse as a field in x and y instead of a function of s.
        #[arg(long)]
        field: bool,
    },
}

const EXIT_NEGATIVE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(cli: &Cli) -> Result<config::Resolved, RunError> {
    let path = cli.config.as_ref().ok_or_else(|| config::ConfigError::new("--config", "this command needs a configuration file"))?;
    let cfg = ProblemConfig::load(path)?;
    Ok(resolve(&cfg, cli.n_trunc)?)
}

fn run(cli: &Cli) -> Result<Output, RunError> {
    match &cli.command {
        Command::Eigen => commands::eigen(&load(cli)?),
        Command::Conditions => commands::conditions(&load(cli)?),
        Command::Solve => commands::solve(&load(cli)?, cli.skip_conditions),
        Command::Reproduce { id } => reproduce::run(id, cli.n_trunc),
        Command::ParseCheck { expr, field } => Ok(commands::parse_check(expr, *field)),
    }
}

fn emit(cli: &Cli, out: &Output) -> std::io::Result<()> {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &cli.out {
        output::write_dir(dir, out)?;
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match cli.format {
        Format::Text => lock.write_all(out.text.as_bytes())?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut lock, &out.report)?;
            writeln!(lock)?;
        }
        Format::Csv => {
            if let Some(t) = out.tables.first() {
                t.write(&mut lock).map_err(std::io::Error::other)?;
            }
        }
    }
    lock.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Reproduce { id } = &cli.command {
        if id == "list" {
            for e in &reproduce::EXAMPLES {
                println!("{:<18} {}", e.id, e.summary);
            }
            return ExitCode::SUCCESS;
        }
    }
    match run(&cli) {
        Ok(out) => {
            if let Err(e) = emit(&cli, &out) {
                eprintln!("error: writing output: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            if out.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NEGATIVE)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
