//! `relayquant`: SER simulation, slope fitting, codebook analysis and
//! analytic audits for parallel amplify-and-forward relay networks.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 validation or audit failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use relayquant::curve::{read_csv_file, write_csv_file};
use relayquant::montecarlo::{default_window, estimate_diversity, estimate_ser};
use relayquant::oracles::run_oracle_suite;
use relayquant::structure::structural_report;

use config::{parse_codebook, parse_config, Manifest};

const THREADS_ENV: &str = "RELAYQUANT_THREADS";

#[derive(Parser)]
#[command(name = "relayquant", version, about = "Quantized-feedback beamforming for AF relay networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate SER curves for every codebook in a config (or manifest).
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory; falls back to the config's output_path.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit the high-power log-log slope of a SER curve.
    Slope {
        #[arg(short, long)]
        input: PathBuf,
        /// Fit window in dB; defaults to the top three grid points.
        #[arg(long, num_args = 2, value_names = ["LO_DB", "HI_DB"], allow_negative_numbers = true)]
        window: Option<Vec<f64>>,
    },
    /// Structural report for a finite codebook.
    Analyze {
        #[arg(short, long)]
        input: PathBuf,
    },
    /// Run the analytic audit suite.
    Oracle {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// A failure and the exit code it maps to.
enum Failure {
    Usage(anyhow::Error),
    Invalid(anyhow::Error),
}

trait Classify<T> {
    fn usage(self) -> std::result::Result<T, Failure>;
    fn invalid(self) -> std::result::Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn usage(self) -> std::result::Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn invalid(self) -> std::result::Result<T, Failure> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("cannot configure the worker pool")
}

fn simulate(config_path: &Path, output: Option<PathBuf>) -> std::result::Result<(), Failure> {
    let text = read_text(config_path).usage()?;
    let config = parse_config(&text)
        .with_context(|| format!("invalid config {}", config_path.display()))
        .invalid()?;
    let dir = output
        .or_else(|| config.output_path.clone())
        .context("no output directory: pass -o or set output_path")
        .usage()?;
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .usage()?;

    let mut outputs = Vec::new();
    for (entry, plan) in config.codebooks.iter().zip(config.plans()) {
        let curve = estimate_ser(&plan)
            .with_context(|| format!("codebook {:?}", entry.label))
            .invalid()?;
        let file = format!("{}.csv", entry.label);
        write_csv_file(&curve, &dir.join(&file))
            .with_context(|| format!("cannot write {file}"))
            .usage()?;
        eprintln!("wrote {}", dir.join(&file).display());
        outputs.push(file);
    }

    let manifest = Manifest {
        seed: config.seed,
        config,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), json + "\n")
        .context("cannot write manifest.json")
        .usage()?;
    Ok(())
}

fn slope(input: &Path, window: Option<Vec<f64>>) -> std::result::Result<(), Failure> {
    let curve = read_csv_file(input)
        .with_context(|| format!("cannot load curve {}", input.display()))
        .invalid()?;
    let window = match window {
        Some(w) => (w[0], w[1]),
        None => default_window(&curve).invalid()?,
    };
    let estimate = estimate_diversity(&curve, window).invalid()?;
    println!("{}", serde_json::to_string_pretty(&estimate).expect("estimate serializes"));
    Ok(())
}

fn analyze(input: &Path) -> std::result::Result<(), Failure> {
    let text = read_text(input).usage()?;
    let label = input.file_stem().and_then(|s| s.to_str()).unwrap_or("codebook");
    let cb = parse_codebook(&text, label)
        .with_context(|| format!("invalid codebook {}", input.display()))
        .invalid()?;
    let report = structural_report(&cb).invalid()?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn oracle(samples: usize, seed: u64) -> std::result::Result<(), Failure> {
    if samples < 2 {
        return Err(Failure::Usage(anyhow::anyhow!("--samples must be at least 2")));
    }
    let results = run_oracle_suite(samples, seed);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{}  {:<width$}  {:>12.4e}  (limit {:.4e})",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.statistic,
            r.threshold,
        );
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invalid(anyhow::anyhow!("failing audits: {}", failed.join("; "))))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let outcome = match cli.command {
        Command::Simulate { config, output } => simulate(&config, output),
        Command::Slope { input, window } => slope(&input, window),
        Command::Analyze { input } => analyze(&input),
        Command::Oracle { samples, seed } => oracle(samples, seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
