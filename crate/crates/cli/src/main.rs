//! `xtalk` — generate, corrupt, correct and analyse two-color interferometer
//! records from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure
//! (non-convergence, degenerate input, total loss of phase tracking),
//! 4 I/O or file-format error, 5 density written but phase tracking was lost
//! on part of the record.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Partial(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
            Self::Io(_) => 4,
            Self::Partial(_) => 5,
        }
    }
}

impl From<xtalk_core::Error> for CliError {
    fn from(e: xtalk_core::Error) -> Self {
        use xtalk_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Io(_) | E::Format(_) => Self::Io(msg),
            E::InvalidParameter(_) | E::Nyquist { .. } | E::UnknownScenario(_) => Self::Config(msg),
            _ => Self::Numeric(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "xtalk", version, about = "Crosstalk removal for two-color heterodyne interferometers")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override the config file. Any key can also be set with
/// `--set key=value`.
#[derive(Debug, Args)]
struct Overrides {
    /// `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output directory (default: $XTALK_OUT_DIR, else the current directory).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<String>,
    /// Coupling matrix, rows separated by `;`, e.g. `1,0.9;0.9,1`.
    #[arg(long, global = true, value_name = "MATRIX")]
    coupling: Option<String>,
    /// `logcosh` or `gauss`.
    #[arg(long, global = true)]
    contrast: Option<String>,
    /// fastICA convergence tolerance.
    #[arg(long, global = true)]
    tol: Option<String>,
    /// `quiet`, `vibration-only` or `shot-ramp`.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Channel SNR in dB, or `none`.
    #[arg(long, global = true, value_name = "DB")]
    snr_db: Option<String>,
    /// Set any configuration key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate clean and mixed records, ground-truth tracks and a manifest.
    Gen,
    /// Apply the configured coupling, noise and quantization to a clean record.
    Mix { input: PathBuf },
    /// Separate a mixed record with fastICA.
    Unmix {
        input: PathBuf,
        /// Manifest of the generating run, for ground-truth metrics
        /// (default: manifest.txt next to the input, if present).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Demodulate both carriers and compute the line-integrated density.
    Density {
        input: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Split a single-detector two-tone record with FIR filters and fastICA.
    /// Without an input, a composite of the configured tones is synthesized.
    Diplex { input: Option<PathBuf> },
    /// Quality report for a generated run directory.
    Report {
        /// Directory holding manifest.txt and the run's files.
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.merge_file(path)?;
        }
        let named = [
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("coupling", &self.coupling),
            ("contrast", &self.contrast),
            ("tol", &self.tol),
            ("scenario", &self.scenario),
            ("snr_db", &self.snr_db),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                cfg.set(key, v).map_err(|m| CliError::Config(format!("--{}: {m}", key.replace('_', "-"))))?;
            }
        }
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
            cfg.set(k.trim(), v).map_err(|m| CliError::Config(format!("--set: {m}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.overrides.resolve()?;
    match cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Mix { input } => commands::mix(&cfg, &input),
        Command::Unmix { input, manifest } => commands::unmix(&cfg, &input, manifest.as_deref()),
        Command::Density { input, manifest } => commands::density(&cfg, &input, manifest.as_deref()),
        Command::Diplex { input } => commands::diplex(&cfg, input.as_deref()),
        Command::Report { dir } => commands::report(&cfg, &dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xtalk: {e}");
            ExitCode::from(e.code())
        }
    }
}
