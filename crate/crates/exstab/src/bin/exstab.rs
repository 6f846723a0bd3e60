//! Thin command-line wrapper around the `exstab` library.
//!
//! Exit codes: 0 on success, 1 when a run completed but some cases failed,
//! 2 on any error (bad config, unreadable run directory, I/O).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use exstab::runner::{emit_report, execute_run, preview_grid, RunConfig};

#[derive(Parser)]
#[command(
    name = "exstab",
    version,
    about = "Evaluate text-explanation stability under seeded input perturbations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute (or resume) the run a config describes.
    Run {
        /// TOML run configuration.
        config: PathBuf,
    },
    /// Recompute report.json and plotdata/ from an existing run directory.
    Report {
        /// Run directory produced by `run`.
        run_dir: PathBuf,
    },
    /// Build the perturbation grid and print it without querying any model.
    Perturb {
        /// TOML run configuration.
        config: PathBuf,
        /// Print each grid case as one JSON line on stdout.
        #[arg(long, required = true)]
        preview: bool,
    },
    /// Check a config file (schema and semantics) and exit.
    Validate {
        /// TOML run configuration.
        config: PathBuf,
    },
}

fn run(command: Command) -> exstab::Result<ExitCode> {
    match command {
        Command::Run { config } => {
            let config = RunConfig::load(&config)?;
            let summary = execute_run(&config)?;
            eprintln!(
                "run complete: {} models x {} cases -> {} ok, {} skipped, {} failed ({} resumed)",
                summary.models,
                summary.grid_cases,
                summary.ok_records,
                summary.skipped_records,
                summary.failed_records,
                summary.resumed_records,
            );
            eprintln!(
                "queries: {} logical, {} sent this invocation",
                summary.logical_queries, summary.api_calls
            );
            if summary.ridge_fallbacks > 0 {
                eprintln!(
                    "note: {} surrogate fits needed the ridge fallback",
                    summary.ridge_fallbacks
                );
            }
            eprintln!("report: {}", summary.run_dir.join("report.json").display());
            Ok(if summary.failed_records > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Report { run_dir } => {
            emit_report(&run_dir)?;
            eprintln!("report: {}", run_dir.join("report.json").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Perturb { config, .. } => {
            let config = RunConfig::load(&config)?;
            let (_, grid, dataset) = preview_grid(&config)?;
            let mut out = String::new();
            for case in &grid {
                out.push_str(&serde_json::to_string(case)?);
                out.push('\n');
            }
            print!("{out}");
            let ready = grid
                .iter()
                .filter(|c| matches!(c.outcome, exstab::perturb::CaseOutcome::Ready { .. }))
                .count();
            eprintln!(
                "{} documents ({} ingested, {} dropped empty) x grid -> {} cases ({} ready, {} skipped)",
                dataset.sampled,
                dataset.ingested,
                dataset.dropped_empty,
                grid.len(),
                ready,
                grid.len() - ready,
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config: path } => {
            let config = RunConfig::load(&path)?;
            config.validate()?;
            if !config.dataset.path.exists() {
                return Err(exstab::Error::Config(format!(
                    "dataset file {} does not exist",
                    config.dataset.path.display()
                )));
            }
            if let Some(lexicon) = &config.perturbations.lexicon {
                exstab::perturb::SynonymLexicon::load(lexicon)?;
            }
            eprintln!(
                "config ok: {} models, {} operators x {} severities, sample {}",
                config.models.len(),
                config.perturbations.operators.len(),
                config.perturbations.severities.len(),
                config.sample_size,
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
