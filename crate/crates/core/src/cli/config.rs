//! Run configuration: a flat TOML file overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::VorticityData;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyHermite,
    VerifyCoeffs,
    VerifyField,
    Sample,
    Moments,
    Dispersive,
    Evolve,
    QuasiInvariance,
    KernelBounds,
    Particle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyHermite => "verify-hermite",
            Command::VerifyCoeffs => "verify-coeffs",
            Command::VerifyField => "verify-field",
            Command::Sample => "sample",
            Command::Moments => "moments",
            Command::Dispersive => "dispersive",
            Command::Evolve => "evolve",
            Command::QuasiInvariance => "quasi-invariance",
            Command::KernelBounds => "kernel-bounds",
            Command::Particle => "particle",
        }
    }

    /// Basis size used when neither the file nor the flags set one.
    fn default_n(self) -> u32 {
        match self {
            Command::VerifyHermite => 12,
            Command::VerifyCoeffs => 6,
            Command::Dispersive => 40,
            Command::Particle => 8,
            _ => 4,
        }
    }

    fn default_m(self) -> usize {
        match self {
            Command::Moments => 100_000,
            Command::QuasiInvariance => 10_000,
            _ => 100,
        }
    }

    fn default_t(self) -> f64 {
        match self {
            Command::Evolve => 1.0,
            Command::Particle => 0.2,
            _ => 0.1,
        }
    }

    fn default_tol(self) -> f64 {
        match self {
            Command::Evolve => 1e-9,
            Command::QuasiInvariance => 1e-8,
            _ => 1e-6,
        }
    }
}

/// Every optional setting, shared by the config file and the flags.
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Largest per-axis Hermite index of the box basis
    #[arg(long = "N")]
    #[serde(rename = "N", alias = "n")]
    pub n: Option<u32>,
    /// Gaussian scale, in (0, 1)
    #[arg(long)]
    pub c: Option<f64>,
    /// Inverse temperature of the Gaussian measure
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Final time
    #[arg(long = "t")]
    #[serde(alias = "t")]
    pub t_final: Option<f64>,
    /// Integrator tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Monte Carlo sample count
    #[arg(long = "M")]
    #[serde(rename = "M", alias = "m")]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parent directory for the timestamped run directory
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads [env: OUE_THREADS]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Sample real coefficients only
    #[arg(long)]
    pub real_mode: Option<bool>,
    /// Vorticity profile: gaussian, ring or dipole
    #[arg(long)]
    pub vorticity: Option<String>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub width: Option<f64>,
    /// Ring radius or dipole separation
    #[arg(long)]
    pub extra: Option<f64>,
    /// Series order for the velocity kernel, 1 to 3
    #[arg(long)]
    pub order: Option<u32>,
    /// Monte Carlo samples per kernel series term
    #[arg(long)]
    pub kernel_samples: Option<usize>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(n, c, gamma, t_final, tol, m, seed, output_dir, threads, real_mode, vorticity, amplitude, width, extra, order, kernel_samples)
    }
}

/// A validated configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(rename = "N")]
    pub n: u32,
    pub c: f64,
    pub gamma: f64,
    pub t_final: f64,
    pub tol: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub real_mode: bool,
    pub vorticity: VorticityData,
    pub order: u32,
    pub kernel_samples: usize,
}

impl RunConfig {
    /// The defaults for `command`.
    pub fn for_command(command: Command) -> Self {
        Self::resolve(command, Settings::default()).expect("defaults are valid")
    }

    pub fn resolve(command: Command, s: Settings) -> Result<Self> {
        let width = s.width.unwrap_or(0.5);
        let vorticity = VorticityData::from_name(
            s.vorticity.as_deref().unwrap_or("gaussian"),
            s.amplitude.unwrap_or(1.0),
            width,
            s.extra.unwrap_or(1.0),
        )?;
        let threads = s.threads.or_else(|| std::env::var("OUE_THREADS").ok().and_then(|v| v.parse().ok()));
        let cfg = RunConfig {
            command,
            n: s.n.unwrap_or(command.default_n()),
            c: s.c.unwrap_or(0.5),
            gamma: s.gamma.unwrap_or(1.0),
            t_final: s.t_final.unwrap_or(command.default_t()),
            tol: s.tol.unwrap_or(command.default_tol()),
            m: s.m.unwrap_or(command.default_m()),
            seed: s.seed.unwrap_or(0),
            output_dir: s.output_dir.unwrap_or_else(|| PathBuf::from("runs")),
            threads,
            real_mode: s.real_mode.unwrap_or(false),
            vorticity,
            order: s.order.unwrap_or(if command == Command::Particle { 1 } else { 3 }),
            kernel_samples: s.kernel_samples.unwrap_or(200_000),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(msg));
        if !(self.c > 0.0 && self.c < 1.0) {
            return fail(format!("c must lie in (0, 1), got {}", self.c));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.n < 1 {
            return fail("N must be at least 1".into());
        }
        if self.m < 1 {
            return fail("M must be at least 1".into());
        }
        if !self.t_final.is_finite() {
            return fail(format!("t must be finite, got {}", self.t_final));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        if !(1..=3).contains(&self.order) {
            return fail(format!("order must be 1, 2 or 3, got {}", self.order));
        }
        if self.kernel_samples < 2 {
            return fail("kernel_samples must be at least 2".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let file: Settings = toml::from_str("N = 5\nc = 0.3\nseed = 9\nvorticity = \"ring\"").unwrap();
        let flags = Settings { c: Some(0.7), ..Default::default() };
        let cfg = RunConfig::resolve(Command::Evolve, file.overlay(flags)).unwrap();
        assert_eq!((cfg.n, cfg.c, cfg.seed), (5, 0.7, 9));
        assert_eq!(cfg.vorticity.name(), "ring");
        assert_eq!(cfg.tol, 1e-9);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(toml::from_str::<Settings>("bogus = 1").is_err());
        for s in [
            Settings { c: Some(1.0), ..Default::default() },
            Settings { gamma: Some(0.0), ..Default::default() },
            Settings { n: Some(0), ..Default::default() },
            Settings { m: Some(0), ..Default::default() },
            Settings { vorticity: Some("square".into()), ..Default::default() },
        ] {
            assert!(RunConfig::resolve(Command::Sample, s).is_err());
        }
    }
}
