//! The four subcommands. Each returns its exit code on a completed run and a
//! [`CliError`] when it could not run at all.

use std::path::{Path, PathBuf};

use pinstt_core::neural::TubeNet;
use pinstt_core::simulator::simulate as run_simulation;
use pinstt_core::trainer::train;
use pinstt_core::verifier::certify;
use serde_json::json;

use crate::scenario::{parse_scenario, Bundle};
use crate::{
    plot, CliError, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_SIMULATION_FAILED, EXIT_VERIFY_FAILED,
};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.json";

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn load_bundle(path: &Path, seed_override: Option<u64>) -> Result<Bundle, CliError> {
    let mut bundle = parse_scenario(path)?;
    if let Some(seed) = seed_override {
        bundle.override_seed(seed);
    }
    Ok(bundle)
}

pub fn load_model(path: &Path) -> Result<TubeNet, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    TubeNet::from_bytes(&bytes).map_err(|e| CliError::Model {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Default training-log path next to the model: `tube.pnst` -> `tube.log.csv`.
pub fn default_log_path(model: &Path) -> PathBuf {
    model.with_extension("log.csv")
}

/// Trains a tube and writes the model and the per-epoch loss log.
pub fn synth(
    scenario: &Path,
    out: &Path,
    log_path: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<i32, CliError> {
    let bundle = load_bundle(scenario, seed_override)?;
    let log_path = log_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_log_path(out));
    match train(&bundle.scenario, &bundle.training) {
        Ok((net, log)) => {
            write_file(out, net.to_bytes())?;
            write_file(&log_path, log.to_csv())?;
            let summary = json!({
                "converged": log.converged,
                "best_total": log.best_total,
                "epochs": log.final_epoch + 1,
                "wall_clock_s": log.wall_clock_s,
                "model": out.display().to_string(),
                "log": log_path.display().to_string(),
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            if log.converged {
                Ok(EXIT_OK)
            } else {
                log::warn!(
                    "loss {:.3e} did not reach the tolerance {:.1e} within {} epochs",
                    log.best_total,
                    bundle.training.tolerance,
                    bundle.training.max_epochs
                );
                Ok(EXIT_NOT_CONVERGED)
            }
        }
        Err(failure) => {
            write_file(&log_path, failure.log.to_csv())?;
            Err(failure.error.into())
        }
    }
}

/// Certifies a model against its scenario; the report goes to `out` or stdout.
pub fn verify(
    model: &Path,
    scenario: &Path,
    out: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<i32, CliError> {
    let net = load_model(model)?;
    let bundle = load_bundle(scenario, seed_override)?;
    let cert = certify(&net, &bundle.scenario, &bundle.training)?;
    let report = cert.to_json();
    match out {
        Some(path) => write_file(path, &report)?,
        None => print!("{report}"),
    }
    if cert.pass {
        Ok(EXIT_OK)
    } else {
        for f in &cert.failures {
            log::warn!("certificate: {f}");
        }
        Ok(EXIT_VERIFY_FAILED)
    }
}

/// Runs the closed loop and writes `trajectory.csv` and `metrics.json` into `out_dir`.
pub fn simulate(
    model: &Path,
    scenario: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<i32, CliError> {
    let net = load_model(model)?;
    let bundle = load_bundle(scenario, seed_override)?;
    let plant = bundle.simulation.plant.build()?;
    let (traj, metrics) = run_simulation(
        plant.as_ref(),
        &net,
        &bundle.scenario,
        &bundle.controller.to_config(),
        &bundle.simulation.to_config(bundle.scenario.t_c),
    )?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    write_file(&out_dir.join(TRAJECTORY_FILE), traj.to_csv())?;
    let mut report = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    report.push('\n');
    write_file(&out_dir.join(METRICS_FILE), &report)?;
    print!("{report}");
    Ok(if metrics.success {
        EXIT_OK
    } else {
        EXIT_SIMULATION_FAILED
    })
}

/// Renders a trajectory, the scenario and optionally the tube as SVG.
pub fn plot(
    trajectory: &Path,
    scenario: &Path,
    out: &Path,
    model: Option<&Path>,
) -> Result<i32, CliError> {
    let bundle = load_bundle(scenario, None)?;
    let csv = std::fs::read_to_string(trajectory).map_err(|e| CliError::io(trajectory, e))?;
    let traj = plot::read_trajectory(&csv, bundle.scenario.dim())
        .map_err(|msg| CliError::Runtime(format!("{}: {msg}", trajectory.display())))?;
    let net = model.map(load_model).transpose()?;
    if net.is_none() {
        log::warn!("no model given; tube circles are omitted");
    }
    let svg = plot::render(&bundle.scenario, &traj, net.as_ref())?;
    write_file(out, svg)?;
    Ok(EXIT_OK)
}
