use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, the tour reader and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate hull")]
    DegenerateHull,

    #[error("empty initialization")]
    EmptyInitialization,

    #[error("no convergence after {steps} steps")]
    NoConvergence { steps: u64 },

    #[error("infeasible packing: {n} cities with separation {min_separation} after {attempts} attempts")]
    InfeasiblePacking {
        n: usize,
        min_separation: f64,
        attempts: u64,
    },

    #[error("not a permutation of {n} cities")]
    NotAPermutation { n: usize },

    #[error("empty blob")]
    EmptyBlob,

    #[error("city off perimeter: {label}")]
    CityOffPerimeter { label: String },

    #[error("use two_opt: held_karp supports 3..=24 cities, got {n}")]
    UseTwoOpt { n: usize },

    #[error("brute force supports at most 9 cities, got {n}")]
    TooManyForBruteForce { n: usize },

    #[error("restarts must be ≥1")]
    NoRestarts,

    #[error("two_opt needs at least 4 cities, got {n}")]
    TooFewForTwoOpt { n: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
