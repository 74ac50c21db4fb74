use std::path::PathBuf;

use thiserror::Error;

use crate::lp::LpError;
use crate::rng::SampleError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("{owner} references unknown series `{name}`")]
    DanglingSeries { owner: String, name: String },
    #[error("{owner} references bus {bus}, but the system has {count} buses")]
    DanglingBus { owner: String, bus: usize, count: usize },
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant { invariant: &'static str, detail: String },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("bracket [{lo}, {hi}] does not straddle target {target}; trace {trace:?}")]
    Bracket { lo: f64, hi: f64, target: f64, trace: Vec<(f64, f64)> },
    #[error("reliability is not monotone over the bracket (use common random numbers); trace {trace:?}")]
    NonMonotone { trace: Vec<(f64, f64)> },
}

impl Error {
    pub fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant { invariant, detail: detail.into() }
    }

    /// Process exit code: 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Parse(_)
            | Error::DanglingSeries { .. }
            | Error::DanglingBus { .. }
            | Error::Invariant { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
