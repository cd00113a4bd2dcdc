use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fourier_stream::eval::{self, ReportRow, RunConfig, StreamSource};
use fourier_stream::stream::{hyperplane_stream, write_csv, ConceptSchedule, LoadOptions};

#[derive(Parser)]
#[command(name = "fourier-stream", version, about = "Recurrent-concept stream classification with Fourier-encoded trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a recurring hyperplane stream described by a schedule file.
    Generate {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one configuration prequentially.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV or ARFF stream; overrides the config's own source.
        #[arg(long)]
        stream: Option<PathBuf>,
        /// Class column of `--stream`.
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        report: PathBuf,
        /// Fill the throughput column (makes the report machine-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Evaluate every `*.conf` file in a directory.
    Sweep {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        timing: bool,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate { schedule, out } => generate(&schedule, &out),
        Command::Run {
            config,
            stream,
            class,
            report,
            timing,
        } => run(&config, stream, class, &report, timing),
        Command::Sweep {
            configs,
            report,
            timing,
        } => {
            let rows = eval::sweep_dir(&configs)
                .with_context(|| format!("sweeping {}", configs.display()))?;
            write_report(&report, &rows, timing)?;
            let failed = rows.iter().filter(|r| r.is_err()).count();
            eprintln!("{} runs, {failed} failed", rows.len());
            Ok(())
        }
    }
}

fn generate(schedule: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(schedule)
        .with_context(|| format!("reading {}", schedule.display()))?;
    let schedule = ConceptSchedule::parse(&text)?;
    let space = Arc::new(schedule.space()?);
    let records = hyperplane_stream(&schedule, space.clone())?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(BufWriter::new(file), &space, records)?;
    eprintln!("wrote {} records to {}", schedule.len(), out.display());
    Ok(())
}

fn run(config: &Path, stream: Option<PathBuf>, class: Option<String>, report: &Path, timing: bool) -> Result<()> {
    let mut config = RunConfig::load(config)
        .with_context(|| format!("loading {}", config.display()))?;
    if let Some(path) = stream {
        let (old_class, options) = match &config.source {
            StreamSource::File { class, options, .. } => (class.clone(), *options),
            _ => (
                None,
                LoadOptions {
                    integer_codes: true,
                    ..LoadOptions::default()
                },
            ),
        };
        config.source = StreamSource::File {
            path,
            class: class.or(old_class),
            options,
        };
    }
    let row = eval::run_config(&config).map_err(|e| (config.clone(), e.to_string()));
    if let Err((_, reason)) = &row {
        eprintln!("run failed: {reason}");
    }
    let failed = row.is_err();
    write_report(report, &[row], timing)?;
    if failed {
        std::process::exit(1);
    }
    Ok(())
}

fn write_report(path: &Path, rows: &[ReportRow], timing: bool) -> Result<()> {
    let csv = eval::report_csv(rows, timing)?;
    fs::write(path, csv).with_context(|| format!("writing {}", path.display()))
}
