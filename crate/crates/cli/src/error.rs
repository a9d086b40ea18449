// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}:{line}: {message}", path.display())]
    Ingest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),

    #[error(transparent)]
    Library(#[from] bayescpd::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    /// 2 for configuration problems, 3 for unreadable or unusable data,
    /// 4 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        use bayescpd::Error as E;
        match self {
            Self::Config(_) | Self::Write(_) => 2,
            Self::Ingest { .. } | Self::Read { .. } => 3,
            Self::Library(e) => match e {
                E::Config(_) | E::Window { .. } => 2,
                E::InsufficientData(_) | E::DegenerateVariance | E::Domain(_) => 3,
                E::Model(_) | E::OracleScale { .. } | E::OracleNumerics(_) => 4,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
