use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use superphonon_cli::commands::{check_grids, compare, execute, run_document, sweep};
use superphonon_cli::config::{apply_override, parse_document, parse_override, resolve, SweepParam};
use superphonon_cli::presets::run_figure;
use superphonon_cli::CliError;
use superphonon_core::trajectory::uniform_grid;
use toml::{Table, Value};

/// Phonon superradiance from quantum dots on a nanomechanical resonator.
#[derive(Parser)]
#[command(name = "superphonon", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override a configuration key, e.g. `--set params.kappa=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write `<output>.csv` and `<output>.meta.json`.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run two scenarios on the same grid and print their deviations as JSON.
    Compare { a: PathBuf, b: PathBuf },
    /// Vary one parameter of a scenario and write a summary table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// kappa, eta, nbar or n_dots.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
    },
    /// Reproduce the data behind figure 2, 3 or 4.
    Figure {
        #[arg(value_parser = clap::value_parser!(u32).range(2..=4))]
        number: u32,
    },
}

fn load(path: &Path, overrides: &[(String, Value)]) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut doc = parse_document(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for (k, v) in overrides {
        apply_override(&mut doc, k, v.clone())?;
    }
    Ok(doc)
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    let overrides = cli.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    let quiet = cli.quiet;
    let note = |p: &Path| {
        if !quiet {
            eprintln!("wrote {}", p.display());
        }
    };
    let warn = |ws: &[String]| {
        if !quiet {
            for w in ws {
                eprintln!("warning: {w}");
            }
        }
    };
    match cli.command {
        Command::Run { config } => {
            let doc = load(&config, &overrides)?;
            let (_, outcome, csv) = run_document(doc, &cli.out)?;
            warn(&outcome.traj.warnings);
            note(&csv);
        }
        Command::Compare { a, b } => {
            let ca = resolve(load(&a, &overrides)?)?;
            let cb = resolve(load(&b, &overrides)?)?;
            check_grids(&uniform_grid(ca.t_end, ca.dt_out)?, &uniform_grid(cb.t_end, cb.dt_out)?)?;
            let ra = execute(&ca)?;
            let rb = execute(&cb)?;
            let report = compare(&ra.traj, &rb.traj)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?);
        }
        Command::Sweep { config, param, values } => {
            let param: SweepParam = param.parse()?;
            let doc = load(&config, &overrides)?;
            let (_, summary) = sweep(&doc, param, &values, &cli.out, note)?;
            note(&summary);
        }
        Command::Figure { number } => {
            fs::create_dir_all(&cli.out)?;
            for (outcome, _) in run_figure(number, &overrides, &cli.out, note)? {
                warn(&outcome.traj.warnings);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
