//! The `lk` command-line front-end.

pub mod config;
pub mod output;

mod commands;
mod input;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lk_core::LkError;

pub use config::{Format, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "lk", version, about = "Lipschitz-Killing curvatures and collapse sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Intrinsic volumes V_i of a closed manifold.
    Compute(Common),
    /// V_i(M(ε)) along a collapse schedule.
    Sweep(Common),
    /// Sectional-curvature minima per plane class along a collapse schedule.
    Sectional(Common),
    /// Monte-Carlo tube volume of an embedded surface.
    Tube(Common),
    /// Riemannian-submersion check.
    Validate(Common),
    /// Runs a named invariant suite (gauss-bonnet, volume, volume-scaling, submersions).
    Check(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// zoo:name?k=v URI or a JSON file (chart, chart list, submersion or embedding).
    /// For `check`, the suite name.
    input: String,
    /// Indices i, comma separated.
    #[arg(long = "i", value_delimiter = ',')]
    i: Vec<usize>,
    /// Comma list or geometric `start:ratio:count`.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn exit_code(e: &LkError) -> i32 {
    match e {
        LkError::InvalidSubmersion { .. } => EXIT_VALIDATION,
        LkError::NonConvergence { .. } | LkError::NonIntegerEuler { .. } | LkError::Singular { .. } => {
            EXIT_NONCONVERGENCE
        }
        _ => EXIT_INPUT,
    }
}

/// Parses arguments, runs the command and returns what would be printed.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Outcome {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                },
                _ => Outcome {
                    code: EXIT_INPUT,
                    stdout: String::new(),
                    stderr: text,
                },
            };
        }
    };
    let (name, common) = match cli.command {
        Command::Compute(c) => ("compute", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Sectional(c) => ("sectional", c),
        Command::Tube(c) => ("tube", c),
        Command::Validate(c) => ("validate", c),
        Command::Check(c) => ("check", c),
    };
    let out = common.out.clone();
    let result = build_config(name, &common).and_then(|cfg| commands::execute(&cfg));
    match result {
        Ok((code, text)) => match out {
            Some(path) => match std::fs::write(&path, &text) {
                Ok(()) => Outcome {
                    code,
                    ..Default::default()
                },
                Err(e) => Outcome {
                    code: EXIT_INPUT,
                    stdout: String::new(),
                    stderr: format!("error: cannot write {}: {e}\n", path.display()),
                },
            },
            None => Outcome {
                code,
                stdout: text,
                stderr: String::new(),
            },
        },
        Err(e) => Outcome {
            code: exit_code(&e),
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn build_config(command: &str, c: &Common) -> lk_core::Result<RunConfig> {
    let eps_default = match command {
        "sweep" | "sectional" => Some(config::DEFAULT_SCHEDULE),
        "tube" => Some("0.1"),
        _ => None,
    };
    let eps = match c.eps.as_deref().or(eps_default) {
        Some(spec) => config::parse_eps(spec)?,
        None => Vec::new(),
    };
    let samples = c.samples.unwrap_or(match command {
        "tube" => 1_000_000,
        "sectional" | "validate" => 64,
        _ => 0,
    });
    let cfg = RunConfig {
        command: command.to_string(),
        input: c.input.clone(),
        i: c.i.clone(),
        eps,
        max_nodes: lk_core::quadrature::QuadratureOptions::from_env()?.max_nodes,
        format: c.format,
        seed: c.seed,
        samples,
        workers: c.workers,
    };
    cfg.check()?;
    Ok(cfg)
}
