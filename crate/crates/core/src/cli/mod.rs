//! The `oue` command line driver.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for usage
//! errors (bad flags, invalid config, unwritable output directory).

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

pub use config::{Command, RunConfig, Settings};
pub use experiments::run_experiment;
pub use report::{Check, Outcome, RunManifest};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "oue", version, about = "Hermite-Galerkin experiments for the Ornstein-Uhlenbeck Euler equation")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Flat TOML file with the same keys as the flags; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Parses `args`, runs the command, persists the run and reports on stdout.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS });
        }
    };
    let settings = match &cli.config {
        Some(path) => Settings::from_file(path).map(|f| f.overlay(cli.settings.clone())),
        None => Ok(cli.settings.clone()),
    };
    let cfg = match settings.and_then(|s| RunConfig::resolve(cli.command, s)) {
        Ok(cfg) => cfg,
        Err(e) => return usage(e),
    };
    let started = chrono::Utc::now();
    let dir = match report::create_run_dir(&cfg, &started.format("%Y%m%dT%H%M%SZ").to_string()) {
        Ok(d) => d,
        Err(e) => return usage(e),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return usage(Error::InvalidArgument(e.to_string())),
    };
    let clock = Instant::now();
    let outcome = match pool.install(|| run_experiment(&cfg)) {
        Ok(o) => o,
        Err(e) => {
            // an experiment that cannot finish counts as a failed check
            let mut o = Outcome::default();
            o.checks.push(Check::at_most("experiment-completed", 1.0, 0.0).with_detail(e.to_string()));
            o
        }
    };
    let manifest = match report::persist(&cfg, &outcome, &dir, started.to_rfc3339(), clock.elapsed().as_secs_f64()) {
        Ok(m) => m,
        Err(e) => return usage(e),
    };
    for c in &manifest.checks {
        println!("{}", c.line());
    }
    println!("run directory: {}", dir.display());
    ExitCode::from(if manifest.passed { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn usage(e: Error) -> ExitCode {
    eprintln!("oue: {e}");
    ExitCode::from(EXIT_USAGE)
}
