use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ymhd_cli::presets::{self, PRESETS};
use ymhd_cli::{run_experiment, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "ymhd", version, about = "Yang-Mills-Higgs-Dirac evolution on expanding backgrounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a preset name.
    Run {
        config: String,
        /// Output directory (overrides `output.directory`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config file or preset name.
    Validate { config: String },
    /// List the shipped presets, optionally writing them as TOML files.
    Presets {
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Regenerate the plots of a run directory from its CSV files.
    Replot { dir: PathBuf },
}

fn load(spec: &str) -> Result<RunConfig, CliError> {
    let path = Path::new(spec);
    if path.exists() {
        return RunConfig::from_path(path);
    }
    match presets::find(spec) {
        Some(p) => p.config(),
        None => Err(CliError::Io(format!("no config file or preset named `{spec}`"))),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let summary = run_experiment(&cfg, &dir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let setup = cfg.setup().map_err(|e| CliError::Config(vec![e.to_string()]))?;
            println!(
                "valid: n = {}, horizon T = {:.16e}, tau_end = {:.16e}",
                cfg.grid.n,
                setup.dynamics.background.horizon(),
                setup.tau_end
            );
        }
        Command::Presets { write } => {
            for p in &PRESETS {
                println!("{:<20} {}", p.name, p.description);
            }
            if let Some(dir) = write {
                std::fs::create_dir_all(&dir)?;
                for p in &PRESETS {
                    std::fs::write(dir.join(format!("{}.toml", p.name)), p.toml)?;
                }
            }
        }
        Command::Replot { dir } => {
            for f in ymhd_cli::output::replot(&dir)? {
                println!("{}", dir.join(f).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
