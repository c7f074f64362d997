//! Command-line driver: loads a TOML run configuration, runs one of the
//! verification suites and writes its tables plus a run-metadata file.
//!
//! Exit codes: 0 all checks passed, 1 a check failed, 2 configuration or I/O
//! error, 3 numerical failure.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use crate::config::{Format, RunConfig, VariantChoice};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<cfe_core::Error> for CliError {
    fn from(e: cfe_core::Error) -> Self {
        use cfe_core::Error as E;
        match e {
            E::Config(_) | E::Dimension { .. } => CliError::Config(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
            E::Range { .. } | E::Solver { .. } | E::Degenerate { .. } => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cfe", version, about = "Coherent functional expansion verification suites")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true, env = "CFE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format (overrides `output.format`).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (overrides `solver.threads`).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Coherent overlaps, number projection and phase quadrature.
    Overlaps,
    /// Leading eigenpairs of the functional operator.
    Spectrum {
        #[arg(long, value_enum)]
        variant: Option<VariantChoice>,
    },
    /// Fock-space ground energies against the mean-field prediction.
    Compare,
    /// Perturbation series in ε against direct diagonalization.
    Perturb,
    /// Spectra at ±ε.
    Scan,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Overlaps => "overlaps",
            Command::Spectrum { .. } => "spectrum",
            Command::Compare => "compare",
            Command::Perturb => "perturb",
            Command::Scan => "scan",
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        cfg.solver.threads = Some(t);
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let cfg = load_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.solver.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let report = pool.install(|| match cli.command {
        Command::Overlaps => commands::overlaps(&cfg),
        Command::Spectrum { variant } => commands::spectrum(&cfg, variant.unwrap_or(cfg.spectrum.variant)),
        Command::Compare => commands::compare(&cfg),
        Command::Perturb => commands::perturb(&cfg),
        Command::Scan => commands::scan(&cfg),
    })?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut written = report.write(&cfg.output.dir, cfg.output.format)?;
    // timing lives apart from the results so those stay byte-reproducible
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = serde_json::json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": timestamp,
        "elapsed_seconds": elapsed,
        "threads": pool.current_num_threads(),
        "config": cfg,
    });
    let meta_path = cfg.output.dir.join(format!("{}.meta.json", cli.command.name()));
    std::fs::write(&meta_path, format!("{meta:#}\n"))
        .map_err(|e| CliError::Io(format!("{}: {e}", meta_path.display())))?;
    written.push(meta_path);

    for note in &report.notes {
        eprintln!("note: {note}");
    }
    for c in &report.checks {
        println!(
            "{} {} value {} tolerance {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            report::fmt_float(c.value),
            report::fmt_float(c.tolerance)
        );
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(report.all_passed())
}

/// Runs the CLI and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
