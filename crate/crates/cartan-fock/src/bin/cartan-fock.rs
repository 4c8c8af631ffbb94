use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use cartan_fock::cli::{run, Command, ExitStatus, RunConfig, CACHE_ENV};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cartan-fock", version, about = "Cartan subproduct systems: scans, CG checks and chain caches")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Conjecture quantities a, b, c and their duals, with rate fits and the f-estimate.
    Scan(Opts),
    /// Clebsch-Gordan closed form against numerical extraction.
    Cg(Opts),
    /// Defining relations of the quantum symmetric Fock space and the chain intertwiner.
    Qda(Opts),
    /// Star-commutation defect and the creation/right-creation commutator.
    Star(Opts),
    /// Build, store, reload and verify chain cache files.
    Cache(Opts),
}

#[derive(Args)]
struct Opts {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long = "max-level")]
    max_level: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    format: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, o) = match cli.cmd {
        Cmd::Scan(o) => (Command::Scan, o),
        Cmd::Cg(o) => (Command::Cg, o),
        Cmd::Qda(o) => (Command::Qda, o),
        Cmd::Star(o) => (Command::Star, o),
        Cmd::Cache(o) => (Command::Cache, o),
    };
    let overrides: Vec<(String, String)> = [
        ("N", o.n),
        ("q", o.q),
        ("lambda", o.lambda),
        ("max_level", o.max_level),
        ("out", o.out),
        ("format", o.format),
    ]
    .into_iter()
    .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
    .collect();
    let cfg = match RunConfig::load(o.config.as_deref(), std::env::var(CACHE_ENV).ok(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(ExitStatus::Config.code() as u8);
        }
    };
    let report = run(cmd, &cfg);
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    if let Err(e) = report.emit(cfg.outdir.as_deref(), &mut lock) {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(ExitStatus::Violation.code() as u8);
    }
    let _ = lock.flush();
    for line in &report.summary {
        eprintln!("{}: {line}", cmd.name());
    }
    ExitCode::from(report.status.code() as u8)
}
