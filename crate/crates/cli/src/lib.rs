//! Command-line front end for `squeezer-core`: threshold reports, pump and
//! frequency sweeps, Monte Carlo verification and an invariant self-check.

// `!(x >= y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod check;
pub mod commands;
pub mod config;
pub mod plot;

use config::ConfigFile;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Statistical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 1,
            Self::Numerical(_) => 2,
            Self::Statistical(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "squeezer-sim",
    version,
    about = "Steady states and phase-quadrature squeezing of a laser with an intracavity type-II doubler"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Laser and orthogonal-mode thresholds and the threshold squeezing.
    Thresholds(CommonArgs),
    /// Steady state versus pump rate.
    SteadySweep(CommonArgs),
    /// Orthogonal phase variance at one frequency versus pump rate.
    PumpSweep(CommonArgs),
    /// Orthogonal phase variance versus analysis frequency.
    Spectrum(CommonArgs),
    /// Monte Carlo estimate of the spectrum compared with the analytic one.
    McVerify(CommonArgs),
    /// Cross-module invariant suite.
    Check(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Thresholds(_) => "thresholds",
            Self::SteadySweep(_) => "steady-sweep",
            Self::PumpSweep(_) => "pump-sweep",
            Self::Spectrum(_) => "spectrum",
            Self::McVerify(_) => "mc-verify",
            Self::Check(_) => "check",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Self::Thresholds(a)
            | Self::SteadySweep(a)
            | Self::PumpSweep(a)
            | Self::Spectrum(a)
            | Self::McVerify(a)
            | Self::Check(a) => a,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Config file (flat TOML, or a CSV written by this tool).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG plots next to the output file.
    #[arg(long)]
    pub plot: bool,
    /// Seed for Monte Carlo runs and sampled checks.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Where a command's primary output and plots go. Files are created up
/// front so that an unwritable path fails before any work is done.
pub struct Sink {
    out: Option<(PathBuf, File)>,
    plot: bool,
}

impl Sink {
    pub fn open(args: &CommonArgs, cfg: &ConfigFile) -> Result<Self, CliError> {
        let plot = args.plot || cfg.emit_plot.unwrap_or(false);
        let out = match &args.out {
            Some(path) => {
                let f =
                    File::create(path).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
                Some((path.clone(), f))
            }
            None => None,
        };
        if plot && out.is_none() {
            return Err(CliError::Input("plots are written next to --out; give an output path".into()));
        }
        Ok(Self { out, plot })
    }

    pub fn plots_enabled(&self) -> bool {
        self.plot
    }

    /// Writes the primary output to the file, or to stdout without one.
    pub fn write(&mut self, text: &str) -> Result<(), CliError> {
        let result = match &mut self.out {
            Some((_, f)) => f.write_all(text.as_bytes()).and_then(|_| f.flush()),
            None => io::stdout().lock().write_all(text.as_bytes()),
        };
        result.map_err(|e| CliError::Input(format!("write failed: {e}")))
    }

    pub fn has_file(&self) -> bool {
        self.out.is_some()
    }

    /// `<out stem>.<suffix>.svg`, or `<out stem>.svg` for an empty suffix.
    pub fn write_plot(&self, suffix: &str, svg: &str) -> Result<(), CliError> {
        let Some((path, _)) = &self.out else {
            return Ok(());
        };
        let target = plot_path(path, suffix);
        std::fs::write(&target, svg).map_err(|e| CliError::Input(format!("cannot write {}: {e}", target.display())))
    }
}

fn plot_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = if suffix.is_empty() { format!("{stem}.svg") } else { format!("{stem}.{suffix}.svg") };
    out.with_file_name(name)
}

/// Fixed-width scientific notation used in every CSV and report.
pub fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else {
        "NaN".into()
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let args = cli.command.args();
    let cfg = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let mut sink = Sink::open(args, &cfg)?;
    match &cli.command {
        Command::Thresholds(_) => commands::thresholds(&cfg, &mut sink),
        Command::SteadySweep(_) => commands::steady_sweep(&cfg, &mut sink),
        Command::PumpSweep(_) => commands::pump_sweep(&cfg, &mut sink),
        Command::Spectrum(_) => commands::spectrum(&cfg, &mut sink),
        Command::McVerify(a) => commands::mc_verify(&cfg, a.seed, &mut sink),
        Command::Check(a) => check::run(&cfg, a.seed, &mut sink),
    }
}
