//! Error type shared by every module.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse class of a failure, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "resolution error: antenna bin width floor(D*Ns/(W*M)) is 0 \
         (aperture D={aperture}, samples Ns={ns}, window W={window}, antennas M={antennas}); \
         refine dx or widen the aperture"
    )]
    Resolution {
        aperture: f64,
        ns: usize,
        window: f64,
        antennas: usize,
    },

    /// Input that makes an operation meaningless, such as an all-zero field.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "ill-conditioned channel estimate (condition number {cond:.3e}); \
         users {} and {} are the most collinear pair", users.0, users.1
    )]
    IllConditioned { cond: f64, users: (usize, usize) },

    #[error("propagation range too short: intensity peak sits on the last plane z={z}")]
    RangeTooShort { z: f64 },

    #[error("no Gaussian fit available: {0}")]
    MissingFit(String),

    #[error("no cached power profile within {max_gap} deg of {angle} deg (nearest {nearest} deg)")]
    ProfileLookup {
        angle: f64,
        nearest: f64,
        max_gap: f64,
    },

    #[error("snr point {snr_index}, trial {trial}: {source}")]
    Trial {
        snr_index: usize,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain(_)
            | Error::Config(_)
            | Error::Resolution { .. }
            | Error::MissingFit(_)
            | Error::ProfileLookup { .. } => ErrorCategory::Config,
            Error::Degenerate(_) | Error::IllConditioned { .. } | Error::RangeTooShort { .. } => {
                ErrorCategory::Numerical
            }
            Error::Trial { source, .. } => source.category(),
            Error::Parse { .. } | Error::Io { .. } => ErrorCategory::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
