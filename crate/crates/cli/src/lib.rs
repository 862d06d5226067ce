//! `pinstt` command-line front end: scenario files, the four subcommands and
//! their artifacts.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0  | success |
//! | 2  | `synth`: training stopped before reaching the loss tolerance |
//! | 3  | `verify`: certificate failed |
//! | 4  | `simulate`: target missed or controller clamped |
//! | 10 | I/O error |
//! | 11 | scenario file error |
//! | 12 | model file format error |
//! | 13 | runtime error inside a module (divergence, bad dimensions, ...) |
//! | 64 | command-line usage error |

pub mod commands;
pub mod plot;
pub mod scenario;

use std::path::Path;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;
pub const EXIT_SIMULATION_FAILED: i32 = 4;
pub const EXIT_IO: i32 = 10;
pub const EXIT_SCENARIO: i32 = 11;
pub const EXIT_MODEL_FORMAT: i32 = 12;
pub const EXIT_RUNTIME: i32 = 13;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario {path}: {msg}")]
    Scenario { path: String, msg: String },
    #[error("model {path}: {msg}")]
    Model { path: String, msg: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Scenario { .. } => EXIT_SCENARIO,
            CliError::Model { .. } => EXIT_MODEL_FORMAT,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<pinstt_core::Error> for CliError {
    fn from(e: pinstt_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
