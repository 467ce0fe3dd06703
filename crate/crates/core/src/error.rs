use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::engine::SimulationLog;

/// A single violated scenario invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// What the violation is about, e.g. `robot 3` or `playground`.
    pub subject: String,
    pub message: String,
}

impl Violation {
    pub fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: key `{key}`: {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid scenario:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(
        "start grid too dense: closest robots are {spacing:.4} m apart but d0 = {d0} m \
         (minimum feasible spacing is {d0} m)"
    )]
    GridTooDense { spacing: f64, d0: f64 },
    #[error("start grid has {capacity} cells but the scenario has {robots} robots")]
    GridTooSmall { capacity: usize, robots: usize },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Coincident robots: the pairwise barrier is undefined at zero distance.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("robots {i} and {j} coincide (distance {distance:e})")]
pub struct DegenerateGeometry {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation aborted at t = {time}: {cause}")]
    Degenerate {
        time: f64,
        cause: DegenerateGeometry,
        /// Everything logged up to the abort.
        partial: Box<SimulationLog>,
    },
}

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct EmitError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}
