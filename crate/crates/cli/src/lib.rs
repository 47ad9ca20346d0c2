//! Command-line front end: system-spec and curve files, the `analyze`,
//! `simulate`, `track` and `selftest` commands and their exit codes.

pub mod args;
pub mod commands;
pub mod controls;
pub mod curves;
pub mod spec;

use thiserror::Error;

pub use args::{Cli, Command};
pub use commands::run;

/// Process exit status; the numeric values are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    InputError = 1,
    Inconclusive = 2,
    NumericalFailure = 3,
    SelfTestMismatch = 4,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Version of the JSON documents written by `analyze --json` and `track`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] spec::LoadError),
    #[error(transparent)]
    Curve(#[from] curves::CurveError),
    #[error(transparent)]
    Controls(#[from] controls::ControlsError),
    #[error(transparent)]
    Core(#[from] faccs::Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn core_exit(e: &faccs::Error) -> Exit {
    use faccs::Error as E;
    match e.root() {
        E::Inconclusive { .. } | E::OutsideLieSpan { .. } | E::UnsupportedBracketDepth { .. } | E::DecompositionResidual { .. } => {
            Exit::Inconclusive
        }
        E::NonFinite { .. } | E::Indeterminate(_) => Exit::NumericalFailure,
        _ => Exit::InputError,
    }
}

impl CliError {
    pub fn exit(&self) -> Exit {
        match self {
            CliError::Core(e) | CliError::Curve(curves::CurveError::Core(e)) => core_exit(e),
            _ => Exit::InputError,
        }
    }
}
