// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate variance: all non-missing values are identical")]
    DegenerateVariance,

    #[error("invalid window [{start}, {end}] for sequence of length {n}")]
    Window { start: usize, end: usize, n: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("instance too large for exhaustive enumeration (n={n}, k_max={k_max}; limits n<=14, k_max<=4)")]
    OracleScale { n: usize, k_max: usize },

    #[error("quadrature failed to converge: {0}")]
    OracleNumerics(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Self::Model(msg.into())
    }
}
