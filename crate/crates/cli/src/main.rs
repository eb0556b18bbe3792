use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twopoint_cli::config::{preset, Format, PRESETS};
use twopoint_cli::{execute, Command, ConfigSource, Invocation};

#[derive(Parser)]
#[command(name = "twopoint", version, about = "Damped nonlinear wave equation with two-point boundary coupling")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve and write the functional series and nodal snapshots.
    Run(Common),
    /// Grid-refinement study against the manufactured solution.
    Verify(Common),
    /// Blow-up study: H and L series, H(0), detected blow-up time.
    Blowup(Common),
    /// Decay study: eta*, r, energy fit and the sandwich check.
    Decay(Common),
    /// Run every point of the config's [sweep] grid.
    Sweep(Common),
    /// Print a preset as a TOML config.
    Preset { name: String },
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: paper-grid, blowup or decay.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (overrides outputs.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    workers: Option<usize>,
    /// Format of the series and snapshot files.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn invocation(command: Command, c: Common) -> Invocation {
    let source = match (c.config, c.preset) {
        (Some(path), _) => ConfigSource::Path(path),
        (None, Some(name)) => ConfigSource::Preset(name),
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    Invocation {
        command,
        source,
        out: c.out,
        workers: c.workers,
        format: c.format,
    }
}

fn main() -> ExitCode {
    let (command, common) = match Cli::parse().command {
        Sub::Run(c) => (Command::Run, c),
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Blowup(c) => (Command::Blowup, c),
        Sub::Decay(c) => (Command::Decay, c),
        Sub::Sweep(c) => (Command::Sweep, c),
        Sub::Preset { name } => {
            return match preset(&name) {
                Some(cfg) => {
                    print!("{}", cfg.to_toml());
                    ExitCode::SUCCESS
                }
                None => {
                    eprintln!("unknown preset '{name}' (available: {})", PRESETS.join(", "));
                    ExitCode::from(2)
                }
            };
        }
    };
    let outcome = execute(&invocation(command, common));
    if let Some(warnings) = outcome.summary.get("warnings").and_then(|w| w.as_array()) {
        for w in warnings {
            eprintln!("warning: {}", w.as_str().unwrap_or_default());
        }
    }
    if let Some(err) = outcome.summary.get("error").and_then(|e| e.as_str()) {
        eprintln!("error: {err}");
    }
    match &outcome.out_dir {
        Some(dir) => println!("{} -> {} (exit {})", command.name(), dir.display(), outcome.exit_code),
        None => println!("{} (exit {})", command.name(), outcome.exit_code),
    }
    ExitCode::from(outcome.exit_code as u8)
}
