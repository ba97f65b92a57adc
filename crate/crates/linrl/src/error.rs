use std::path::PathBuf;

use thiserror::Error;

/// Library-wide error type.
///
/// Validation errors (bad parameters, malformed configs, infeasible
/// constructions) map to process exit code 2; everything else maps to 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability row at (h={h}, s={s}, a={a}): sum {sum}, min entry {min_entry}")]
    BadProbabilityRow {
        h: usize,
        s: usize,
        a: usize,
        sum: f64,
        min_entry: f64,
    },

    #[error("reward out of range at (h={h}, s={s}, a={a}): {value}")]
    RewardOutOfRange { h: usize, s: usize, a: usize, value: f64 },

    #[error("invalid initial distribution: sum {sum}")]
    BadInitialDistribution { sum: f64 },

    #[error("infeasible escape-chain instance: 3(d-1)*delta_gap = {margin} must be <= escape_prob = {escape_prob} <= 1/3, horizon >= 3, d >= 2")]
    InfeasibleHardInstance { margin: f64, escape_prob: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config validation failed: {0}")]
    Config(String),

    #[error("gap_min is undefined (no strictly positive gap); {context} cannot run")]
    GapMinUndefined { context: &'static str },

    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),

    #[error("regret decomposition identity violated at episode {episode}: |{regret} - {gap_sum}| > 1e-10")]
    DecompositionViolated { episode: usize, regret: f64, gap_sum: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Exit code this error maps to at the CLI boundary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BadProbabilityRow { .. }
            | Error::RewardOutOfRange { .. }
            | Error::BadInitialDistribution { .. }
            | Error::InfeasibleHardInstance { .. }
            | Error::InvalidParameter { .. }
            | Error::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
