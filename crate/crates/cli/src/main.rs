//! `qnd-lab`: predictions, wavefunction checks, Monte Carlo calibration and
//! instrument demonstrations for sequential and joint nondemolition
//! measurements of X and K = P/ħ.
//!
//! Exit codes: 0 success, 1 invalid input or config, 2 numerical or
//! tolerance failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod report;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qnd_core::Exec;

use config::{Config, RawConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qnd-lab", version, about = "Noise and disturbance of nondemolition X/K measurements with correlated probes")]
struct Cli {
    /// Scenario file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set cross.kappa=-0.4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderingArg {
    Xk,
    Kx,
    Joint,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Readout variances, noise, disturbance and uncertainty relations.
    Predict {
        #[arg(long, value_enum)]
        ordering: Option<OrderingArg>,
    },
    /// Compare the moment formulas with a grid wavefunction simulation.
    Oracle {
        #[arg(long, value_enum)]
        ordering: Option<OrderingArg>,
        /// Points per axis (grid.n).
        #[arg(long)]
        n: Option<usize>,
        /// Required grid half-width in standard deviations (grid.extent_sigmas).
        #[arg(long)]
        extent_sigmas: Option<f64>,
        /// Largest accepted deviation (run.tolerance).
        #[arg(long)]
        tolerance: Option<f64>,
        /// Skip the interactions and compare the initial moments.
        #[arg(long)]
        identity: bool,
        /// Write readout distributions to `<PREFIX>_jx.csv` and `<PREFIX>_jk.csv`.
        #[arg(long, value_name = "PREFIX")]
        dump: Option<PathBuf>,
    },
    /// Calibrate noise and estimate disturbance from sampled readouts.
    Sample {
        #[arg(long, value_enum)]
        ordering: Option<OrderingArg>,
        /// Outcomes per batch (run.samples).
        #[arg(long)]
        samples: Option<usize>,
        /// Random seed (run.seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Write the raw outcome batches to `<PREFIX>_{reference,test,without}.csv`.
        #[arg(long, value_name = "PREFIX")]
        batches: Option<PathBuf>,
    },
    /// Classify a grid of Gaussian probe preparations.
    Scan {
        /// Range of δ̃_X/δ_K as LO:HI.
        #[arg(long, default_value = "0.5:2", allow_hyphen_values = true)]
        t: String,
        /// Range of the correlation coefficient as LO:HI.
        #[arg(long, default_value = "-0.9:0.9", allow_hyphen_values = true)]
        r: String,
        /// Grid points as NT,NR.
        #[arg(long, default_value = "4,19")]
        steps: String,
    },
    /// Instrument factorization with product and Bell-correlated probes.
    CheckInstruments {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(cli: &Cli, extra: &[(&str, Option<String>)]) -> Result<Config, CliError> {
    let mut raw = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    for o in &cli.overrides {
        raw.set(o)?;
    }
    for (key, value) in extra {
        if let Some(v) = value {
            raw.set(&format!("{key}={v}"))?;
        }
    }
    Config::from_raw(&raw)
}

fn parse_pair<T: std::str::FromStr>(what: &str, s: &str, sep: char) -> Result<(T, T), CliError> {
    let bad = || CliError::Usage(format!("{what}: expected two values separated by `{sep}`, found `{s}`"));
    let (a, b) = s.split_once(sep).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn ordering_name(o: Option<OrderingArg>) -> Option<String> {
    o.map(|o| match o {
        OrderingArg::Xk => "xk".to_string(),
        OrderingArg::Kx => "kx".to_string(),
        OrderingArg::Joint => "joint".to_string(),
    })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let Format::Csv = cli.format;
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let mut buffer = Vec::new();
    let result = match &cli.command {
        Command::Predict { ordering } => {
            let config = load_config(cli, &[("coupling.ordering", ordering_name(*ordering))])?;
            commands::predict(&config, &mut buffer)
        }
        Command::Oracle { ordering, n, extent_sigmas, tolerance, identity, dump } => {
            let config = load_config(
                cli,
                &[
                    ("coupling.ordering", ordering_name(*ordering)),
                    ("grid.n", n.map(|v| v.to_string())),
                    ("grid.extent_sigmas", extent_sigmas.map(|v| v.to_string())),
                    ("run.tolerance", tolerance.map(|v| v.to_string())),
                ],
            )?;
            let args = commands::OracleArgs { identity: *identity, dump: dump.as_deref(), exec };
            commands::oracle(&config, args, &mut buffer)
        }
        Command::Sample { ordering, samples, seed, batches } => {
            let config = load_config(
                cli,
                &[
                    ("coupling.ordering", ordering_name(*ordering)),
                    ("run.samples", samples.map(|v| v.to_string())),
                    ("run.seed", seed.map(|v| v.to_string())),
                ],
            )?;
            commands::sample(&config, commands::SampleArgs { batches: batches.as_deref(), exec }, &mut buffer)
        }
        Command::Scan { t, r, steps } => {
            let t = parse_pair("--t", t, ':')?;
            let r = parse_pair("--r", r, ':')?;
            let steps = parse_pair("--steps", steps, ',')?;
            commands::scan(t, r, steps, exec, &mut buffer)
        }
        Command::CheckInstruments { dim, seed } => commands::check_instruments(*dim, *seed, &mut buffer),
    };
    // a report that fails its tolerance is still written, for inspection
    if !buffer.is_empty() {
        match &cli.out {
            Some(path) => {
                let mut w = BufWriter::new(File::create(path)?);
                w.write_all(&buffer)?;
                w.flush()?;
            }
            None => io::stdout().lock().write_all(&buffer)?,
        }
    }
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qnd-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
