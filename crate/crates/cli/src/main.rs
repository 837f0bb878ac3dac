//! `surfwave` command-line driver.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};

use surfwave::solver::Formulation;

use crate::config::{Config, Overrides};
use crate::exit::Failure;

#[derive(Debug, Parser)]
#[command(name = "surfwave", version)]
#[command(about = "Weakly nonlinear plasma-vacuum surface waves: roots, simulation, fields, checks")]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    formulation: Option<Formulation>,

    #[arg(long, global = true)]
    n_modes: Option<usize>,

    /// Period of the θ domain.
    #[arg(long, global = true)]
    length: Option<f64>,

    #[arg(long, global = true)]
    t_end: Option<f64>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write a snapshot every this many steps (0 disables).
    #[arg(long, global = true)]
    snapshot_every: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the dispersion roots of the configured background state
    Roots,
    /// Evolve the configured initial profile
    Simulate,
    /// Run the kernel, cross-formulation, conservation and interpolation suites
    #[command(name = "verify-kernels", alias = "verify")]
    Verify,
    /// Reconstruct first-order plasma and vacuum fields from a snapshot
    Fields {
        /// Snapshot file written by `simulate`.
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Recompute norms and blow-up diagnostics from snapshot files
    Analyze {
        snapshots: Vec<PathBuf>,
    },
    /// Time the direct-sum and pseudospectral right-hand sides
    Bench,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("SURFWAVE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::config(anyhow!("SURFWAVE_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(Failure::other)
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    configure_threads()?;
    let ov = Overrides {
        formulation: cli.formulation,
        n_modes: cli.n_modes,
        length: cli.length,
        t_end: cli.t_end,
        seed: cli.seed,
        snapshot_every: cli.snapshot_every,
    };
    let cfg = Config::load(cli.config.as_deref(), &ov)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Roots => commands::roots(&cfg),
        Command::Simulate => {
            let out = out.ok_or_else(|| Failure::config(anyhow!("simulate needs --out")))?;
            commands::simulate(&cfg, out)
        }
        Command::Verify => commands::verify(&cfg),
        Command::Fields { snapshot } => {
            let out = out.ok_or_else(|| Failure::config(anyhow!("fields needs --out")))?;
            commands::fields(&cfg, &snapshot, out)
        }
        Command::Analyze { snapshots } => commands::analyze(&cfg, &snapshots, out),
        Command::Bench => commands::bench_cmd(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
