use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wiretap::harness::{run_experiment, ExperimentId, ExperimentSpec, ResultTable};
use wiretap::Result;

#[derive(Parser)]
#[command(
    name = "wiretap",
    version,
    about = "Artificial-noise beamforming experiments against a MIMO eavesdropper"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a spec file.
    Run {
        spec: PathBuf,
        /// Override the number of trials per sweep point.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        workers: Option<usize>,
        /// Output file; stdout when neither this nor the spec names one.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// List the experiment ids a spec file may use.
    ListExperiments,
    /// Check a spec file without running it.
    Validate { spec: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn write_table(table: &ResultTable, format: Format, out: Option<&Path>) -> Result<()> {
    let sink: Box<dyn Write> = match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(path)?))
        }
        None => Box::new(io::stdout().lock()),
    };
    match format {
        Format::Csv => table.write_csv(sink),
        Format::Json => table.write_json(sink),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            spec,
            trials,
            seed,
            workers,
            out,
            format,
        } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(t) = trials {
                spec.trials = t;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let table = run_experiment(&spec, workers)?;
            for f in &table.failures {
                eprintln!(
                    "trial {} at P = {} dB, S = {} dB failed: {}",
                    f.trial, f.p_db, f.s_db, f.message
                );
            }
            let out = out.or(spec.out.clone());
            write_table(&table, format, out.as_deref())?;
            if let Some(path) = out {
                eprintln!(
                    "{}: {} rows, {} failed trials -> {}",
                    spec.experiment,
                    table.rows.len(),
                    table.failures.len(),
                    path.display()
                );
            }
            Ok(())
        }
        Command::ListExperiments => {
            for id in ExperimentId::ALL {
                println!("{:<26} {}", id.as_str(), id.description());
            }
            Ok(())
        }
        Command::Validate { spec } => {
            let s = ExperimentSpec::load(&spec)?;
            println!(
                "{}: ok ({}, {} sweep points x {} trials)",
                spec.display(),
                s.experiment,
                s.points().count(),
                s.trials
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
