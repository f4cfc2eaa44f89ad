//! `deltaloop`: batch runs of the spectral computations, driven by a TOML
//! config file. Command-line flags take precedence over the file.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::config::{Overrides, KINDS};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "deltaloop",
    version,
    about = "Spectral bounds for a strong delta interaction on a closed curve",
    after_help = "Kinds: geometry, spectrum-1d, transverse, bracket, strip, sweep-thm1, sweep-thm2, count.\n\
                  Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error."
)]
struct Args {
    /// Computation kind; overrides `kind` in the config file.
    kind: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: number of processors).
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated coupling constants, e.g. `40,80,160`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    beta_list: Option<Vec<f64>>,
    #[arg(long)]
    grid_ns: Option<usize>,
    #[arg(long)]
    grid_nu: Option<usize>,
    #[arg(long)]
    grid_n1d: Option<usize>,
    #[arg(long)]
    n_eigs: Option<usize>,
}

fn main_inner(args: Args) -> Result<(), CliError> {
    if let Some(k) = &args.kind {
        config::Kind::parse(k)?;
    }
    let (path, text) = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            (Some(p.display().to_string()), text)
        }
        None => (None, String::new()),
    };
    let over = Overrides {
        kind: args.kind,
        out: args.out,
        workers: args.workers,
        beta_list: args.beta_list,
        grid_ns: args.grid_ns,
        grid_nu: args.grid_nu,
        grid_n1d: args.grid_n1d,
        n_eigs: args.n_eigs,
    };
    let cfg = config::load(path.as_deref(), &text, over)?;
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    }
    run::run(&cfg)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            if code == 2 {
                eprintln!("valid kinds: {}", KINDS.join(", "));
            }
            return ExitCode::from(code);
        }
    };
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("deltaloop: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
