//! `ttlab`: run, validate and summarise return-time experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ttlab::config::ExperimentConfig;
use ttlab::experiment::{run, ComparisonReport, Row, Status};
use ttlab::par::default_workers;

/// Exit status when a run completes but a hard check fails.
const EXIT_FAILED: u8 = 1;
/// Exit status for invalid configs, unreadable inputs and usage errors.
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "ttlab", version, about = "Return-time experiments for skew products over subshifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report and CSV files.
    Run {
        config: PathBuf,
        /// Output directory [default: results/<config stem>]
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Worker threads [default: config `workers`, then $TTLAB_WORKERS, then all cores]
        #[arg(short, long)]
        workers: Option<usize>,
    },
    /// Check a config (schema, shift files, radii) without running it.
    Validate { config: PathBuf },
    /// Summarise the report in a results directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { config, out, workers } => {
            let cfg = load(&config)?;
            let workers = workers
                .or(cfg.scenario.workers())
                .unwrap_or_else(default_workers);
            let out = out.unwrap_or_else(|| default_out(&config));
            let output = run(&cfg, workers).with_context(|| format!("running {}", config.display()))?;
            output
                .write(&out)
                .with_context(|| format!("writing results to {}", out.display()))?;
            print_summary(&output.report);
            println!("results written to {}", out.display());
            Ok(verdict_code(&output.report))
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!(
                "{}: valid {} config (seed {}, sha256 {})",
                config.display(),
                cfg.scenario.name(),
                cfg.scenario.seed(),
                cfg.hash
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir } => {
            let report = ComparisonReport::load(&dir)?;
            print_summary(&report);
            Ok(verdict_code(&report))
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("invalid config {}", path.display()))
}

fn default_out(config: &Path) -> PathBuf {
    let stem = config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    Path::new("results").join(stem)
}

fn verdict_code(report: &ComparisonReport) -> ExitCode {
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

fn print_summary(report: &ComparisonReport) {
    println!("scenario: {}", report.scenario);
    println!("target:   {}", report.target);
    println!(
        "config sha256 {}  seed {}  version {}",
        report.provenance.config_sha256, report.provenance.seed, report.provenance.version
    );
    for row in &report.rows {
        println!("{}", format_row(row));
    }
    match report.status {
        Status::Complete => {}
        Status::Incomplete => println!(
            "INCOMPLETE: {}",
            report.error.as_deref().unwrap_or("resource guard reached")
        ),
    }
    println!("{}", if report.passed { "PASSED" } else { "FAILED" });
}

fn format_row(row: &Row) -> String {
    let kind = if row.hard { "" } else { " (advisory)" };
    let se = row.standard_error.map_or_else(String::new, |s| format!(" ± {s:.4e}"));
    format!(
        "  [{:?}] {}{kind}: empirical {:.6e}{se}, theoretical {:.6e}, tolerance {:.3e} ({:?})",
        row.verdict, row.name, row.empirical, row.theoretical, row.tolerance, row.criterion
    )
}
