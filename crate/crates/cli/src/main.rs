use std::path::PathBuf;
use std::process::ExitCode;

use causality_lab_cli::{gallery, load, prepare, run_to_dir, CliError, Format};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "causality-lab", version, about = "Causal structure experiments on Lorentzian models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a bundled scenario by name) and write reports.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated list of json, csv, svg.
        #[arg(long, value_delimiter = ',', default_value = "json")]
        format: Vec<Format>,
        /// Accepted for compatibility; every computation is deterministic.
        #[arg(long)]
        seedless: bool,
    },
    /// List the bundled scenarios.
    ListScenarios,
    /// Parse and check a scenario without running it.
    Validate { config: PathBuf },
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, format, seedless: _ } => match run_to_dir(&config, &out, &format) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::ListScenarios => {
            for entry in gallery::GALLERY {
                match causality_lab_cli::scenario::Scenario::from_toml(entry.text) {
                    Ok(sc) => println!("{:<28} {:<16} {}", entry.file, sc.task.kind(), sc.description),
                    Err(e) => println!("{:<28} invalid: {e}", entry.file),
                }
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config).and_then(|sc| prepare(&sc).map(|_| sc)) {
            Ok(sc) => {
                println!("ok: {} ({})", sc.name, sc.task.kind());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
