//! `equideform <command> --config <path> [--out <dir>] [--seed <u64>]`

mod commands;
mod config;
mod output;
mod problem;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_USAGE,
            Self::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "equideform", version, about = "Equivariant continuation of symmetric critical points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the curvature-parametrized group bundle.
    VerifyBundle(Common),
    /// Polish a seed and certify equivariant nondegeneracy.
    Analyze(Common),
    /// Continue a branch along the configured parameter path.
    Continue(Common),
    /// Move a polished seed by a random isometry and recover the motion.
    Congruence(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let (command, common) = match cli.command {
        Command::VerifyBundle(c) => ("verify-bundle", c),
        Command::Analyze(c) => ("analyze", c),
        Command::Continue(c) => ("continue", c),
        Command::Congruence(c) => ("congruence", c),
    };
    let (config, bytes) = RunConfig::load(&common.config)?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", common.out.display())))?;
    let base = common.config.parent().unwrap_or(Path::new("."));
    let ctx = Context {
        config: &config,
        base,
        out: &common.out,
        seed: common.seed.or(config.seed).unwrap_or(0),
        input_hash: output::git_blob_hash(&bytes),
    };
    match command {
        "verify-bundle" => commands::verify_bundle(&ctx),
        "analyze" => commands::analyze(&ctx),
        "continue" => commands::continue_path(&ctx),
        _ => commands::congruence(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("equideform: {e}");
            e.code()
        }
    };
    ExitCode::from(code as u8)
}
