use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use gdnls_cli::config::{ExperimentConfig, OUTPUT_DIR_ENV};
use gdnls_cli::{artifacts, experiments, report};

#[derive(Parser)]
#[command(name = "gdnls", version, about = "Gauged derivative NLS experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// `section.key=value`, applied after the file is parsed. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory; beats the config file and the environment.
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Tabulate the assertions of one or more finished runs.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

/// Exit status when the run completed but an assertion failed.
const ASSERTION_FAILED: u8 = 2;

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            overrides,
            output_dir,
        } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let dir = cfg.resolve_output_dir(output_dir.as_deref());
            log::info!("running {} into {} ({OUTPUT_DIR_ENV} sets the default)", cfg.experiment, dir.display());
            let art = experiments::run(&cfg)?;
            artifacts::write(&dir, &cfg, &art)?;
            for a in &art.assertions {
                println!(
                    "{} {}: {}",
                    if a.pass { "PASS" } else { "FAIL" },
                    a.name,
                    a.measured.map_or("non-finite".into(), |m| format!("{m:.6e}"))
                );
            }
            println!("artifacts in {}", dir.display());
            Ok(if art.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(ASSERTION_FAILED)
            })
        }
        Command::Report { dirs } => {
            let refs: Vec<&std::path::Path> = dirs.iter().map(PathBuf::as_path).collect();
            print!("{}", report::report(&refs)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
