use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fell outside its admissible interval.
    #[error("{what} out of range: {detail}")]
    Range { what: &'static str, detail: String },

    /// A WAV or CSV payload could not be decoded.
    #[error("format error in {chunk}: {detail}")]
    Format { chunk: String, detail: String },

    /// Input too short for the requested analysis.
    #[error("size error: {0}")]
    Size(String),

    /// An operating point failed validation against a diode profile.
    #[error("invalid operating point: {0}")]
    Validation(String),

    /// The requested optical power budget cannot be met by the diode.
    #[error("power budget infeasible: {0}")]
    Budget(String),

    /// Light waveform sampled too slowly for the microphone band.
    #[error("sample rate error: {0}")]
    Rate(String),

    #[error("no device named {name:?}; nearest matches: {}", suggestions.join(", "))]
    NotFound {
        name: String,
        suggestions: Vec<String>,
    },

    /// Calibration data cannot determine an edge width.
    #[error("fit error: {0}")]
    Fit(String),

    /// Malformed user input (secrets, scenario values, policy strings).
    #[error("input error: {0}")]
    Input(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn range(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Range {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn format(chunk: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            chunk: chunk.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
