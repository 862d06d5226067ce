use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pinstt_cli::{commands, EXIT_USAGE};

/// Neural spatiotemporal tubes: synthesize, certify, simulate and plot.
#[derive(Parser)]
#[command(name = "pinstt", version, about)]
struct Cli {
    /// Replace the training and simulation seeds from the scenario file.
    #[arg(long, global = true, value_name = "N")]
    seed_override: Option<u64>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info", value_name = "L")]
    log_level: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tube; exits 2 if the loss tolerance was not reached.
    Synth {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Per-epoch loss CSV (default: next to the model as `<stem>.log.csv`).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Certify a trained tube; exits 3 on a failed certificate.
    Verify {
        model: PathBuf,
        scenario: PathBuf,
        /// Certificate JSON path (default: stdout).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run the closed loop; exits 4 unless the target is reached without clamping.
    Simulate {
        model: PathBuf,
        scenario: PathBuf,
        /// Directory for trajectory.csv and metrics.json.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Draw a trajectory CSV over its scenario as SVG.
    Plot {
        trajectory: PathBuf,
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Model whose tube slices are drawn.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .init();
    let seed = cli.seed_override;
    let result = match &cli.command {
        Command::Synth { scenario, out, log } => {
            commands::synth(scenario, out, log.as_deref(), seed)
        }
        Command::Verify {
            model,
            scenario,
            out,
        } => commands::verify(model, scenario, out.as_deref(), seed),
        Command::Simulate {
            model,
            scenario,
            out,
        } => commands::simulate(model, scenario, out, seed),
        Command::Plot {
            trajectory,
            scenario,
            out,
            model,
        } => commands::plot(trajectory, scenario, out, model.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
