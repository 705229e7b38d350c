use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Error families, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Input,
    Duration,
    Config,
    Output,
    Session,
    Processing,
}

impl ErrorFamily {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorFamily::Input => 3,
            ErrorFamily::Duration => 4,
            ErrorFamily::Config => 5,
            ErrorFamily::Output => 6,
            ErrorFamily::Session => 7,
            ErrorFamily::Processing => 8,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unreadable header: {0}")]
    UnreadableHeader(String),
    #[error("text input has no sample rate; pass one explicitly or add an `fs=<Hz>` header line")]
    MissingSampleRate,
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("record contains no samples")]
    EmptyRecord,
    #[error("malformed annotation: {0}")]
    MalformedAnnotation(String),
    #[error("regions overlap: [{0:.6}, {1:.6}] and [{2:.6}, {3:.6}]")]
    OverlappingRegions(f64, f64, f64, f64),
    #[error("session format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt session: {0}")]
    CorruptSession(String),
    #[error("signal is empty")]
    EmptySignal,
    #[error("record has no waveform samples")]
    NoSamples,
    #[error("fewer than 2 usable intervals around beat {0}")]
    EmptyWindow(usize),
    #[error("P-wave search window for beat at {0:.3} s falls outside the record")]
    WindowOutOfRange(f64),
    #[error("interval {0} cannot be split evenly within the regional threshold")]
    IneligibleInterval(usize),
    #[error("intervals {0} and {1} do not form an adjustable pair")]
    NotAPair(usize, usize),
    #[error("record lasts {seconds:.1} s; at least {minimum:.0} s are required")]
    MinimumDuration { seconds: f64, minimum: f64 },
    #[error("test duration {requested:.1} s exceeds record duration {available:.1} s")]
    DurationTooLong { requested: f64, available: f64 },
    #[error("session has no saved test region to reuse")]
    NoSavedRegion,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("edit target does not exist: {0}")]
    InvalidTarget(String),
    #[error("moving the beat to {0:.6} s would pass a neighbouring beat")]
    NonMonotonicTime(f64),
}

impl Error {
    pub(crate) fn read(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Read {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn family(&self) -> ErrorFamily {
        use Error::*;
        match self {
            Io { .. } => ErrorFamily::Output,
            Read { .. } | UnreadableHeader(_) | MissingSampleRate | UnsupportedFormat(_) | EmptyRecord
            | MalformedAnnotation(_) | NoSamples | EmptySignal => ErrorFamily::Input,
            MinimumDuration { .. } | DurationTooLong { .. } => ErrorFamily::Duration,
            InvalidConfig(_) | NoSavedRegion => ErrorFamily::Config,
            VersionMismatch { .. }
            | CorruptSession(_)
            | OverlappingRegions(..)
            | InvalidTarget(_)
            | NonMonotonicTime(_) => {
                ErrorFamily::Session
            }
            EmptyWindow(_) | WindowOutOfRange(_) | IneligibleInterval(_) | NotAPair(..) => {
                ErrorFamily::Processing
            }
        }
    }
}
