use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use clap::Args;
use serde::Serialize;
use sha2::{Digest, Sha256};
use turlab_core::correlator::QReading;
use turlab_core::harness::{
    run_experiment, write_csv, write_json, ExperimentConfig, RunSummary, Variant, THREADS_ENV,
};

use crate::failure::Failure;

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Shots per circuit for the sampled variant.
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 0.75)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta_min: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub theta_max: f64,
    /// Comma-separated subset of exact, neumann1, sampled. The exact variant
    /// is always evaluated.
    #[arg(long, default_value = "exact,neumann1,sampled")]
    pub variants: String,
    #[arg(long, default_value = "linear")]
    pub reading: String,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

pub fn parse_reading(s: &str) -> Result<QReading, Failure> {
    match s {
        "linear" => Ok(QReading::Linear),
        "quadratic" => Ok(QReading::Quadratic),
        other => Err(Failure::Input(format!(
            "unknown reading '{other}' (expected linear or quadratic)"
        ))),
    }
}

fn config_from(args: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let mut variants = args
        .variants
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<Variant>())
        .collect::<Result<std::collections::BTreeSet<_>, _>>()?;
    variants.insert(Variant::Exact);
    let config = ExperimentConfig {
        seed: args.seed,
        n_trials: args.trials,
        shots: args.shots,
        gamma_range: (args.gamma_min, args.gamma_max),
        theta_range: (args.theta_min, args.theta_max),
        variants,
        reading: parse_reading(&args.reading)?,
    };
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a ExperimentConfig,
    summary: &'a RunSummary,
}

#[derive(Serialize)]
struct OutputEntry {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
    config_sha256: String,
    threads: Option<String>,
    started_at: String,
    finished_at: String,
    runtime_seconds: f64,
    outputs: Vec<OutputEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write_json(value, &mut buf)?;
    buf.push(b'\n');
    Ok(buf)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<OutputEntry, Failure> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Failure::io(path.display(), e))?;
    Ok(OutputEntry {
        path: name.to_string(),
        bytes: bytes.len(),
        sha256: sha256_hex(bytes),
    })
}

pub fn run(args: &ExperimentArgs) -> Result<(), Failure> {
    let config = config_from(args)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Failure::io(args.out_dir.display(), e))?;
    let started_at = Utc::now();
    let clock = Instant::now();
    let (records, summary) = run_experiment(&config)?;
    let runtime = clock.elapsed().as_secs_f64();

    let mut csv = Vec::new();
    write_csv(&records, &mut csv)?;
    let outputs = vec![
        write_file(&args.out_dir, "trials.csv", &csv)?,
        write_file(&args.out_dir, "trials.json", &to_json(&records)?)?,
        write_file(
            &args.out_dir,
            "summary.json",
            &to_json(&SummaryFile {
                config: &config,
                summary: &summary,
            })?,
        )?,
    ];
    let manifest = Manifest {
        tool: "turlab",
        version: env!("CARGO_PKG_VERSION"),
        command: "experiment",
        config: &config,
        config_sha256: sha256_hex(&to_json(&config)?),
        threads: std::env::var(THREADS_ENV).ok(),
        started_at: started_at.to_rfc3339_opts(SecondsFormat::Millis, true),
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        runtime_seconds: runtime,
        outputs,
    };
    write_file(&args.out_dir, "manifest.json", &to_json(&manifest)?)?;

    print_summary(&summary, &args.out_dir);
    let exact_violations = summary.exact.map_or(0, |s| s.violations)
        + summary.exact_imag.map_or(0, |s| s.violations)
        + summary.general_tur_violations
        + summary.separable_tur_violations;
    if exact_violations > 0 {
        return Err(Failure::Invariant(format!(
            "{exact_violations} exact-variant violations"
        )));
    }
    Ok(())
}

fn print_summary(s: &RunSummary, dir: &Path) {
    println!("trials: {}", s.trials);
    for (name, stats) in [
        ("exact", s.exact),
        ("exact (imag)", s.exact_imag),
        ("neumann1", s.approx),
        ("sampled", s.sampled),
    ] {
        if let Some(v) = stats {
            println!(
                "{name}: {} violations ({} outside interval, {} TUR) of {}, {} degenerate",
                v.violations, v.bound_violations, v.tur_violations, v.evaluated, v.degenerate
            );
        }
    }
    println!(
        "general TUR violations: {}, separable TUR violations: {}",
        s.general_tur_violations, s.separable_tur_violations
    );
    if !s.failed_trials.is_empty() {
        eprintln!("trials that could not be evaluated: {:?}", s.failed_trials);
    }
    println!("wrote {}", dir.display());
}
