use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point charge within {radius_um} um of the probe point")]
    ChargeAtProbe { radius_um: f64 },
    #[error("fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("fit window is degenerate: {0}")]
    DegenerateWindow(String),
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("shift changes sign for a red-only host")]
    NonMonotoneShift,
    #[error("two-photon ionization is energetically infeasible at {photon_ev:.3} eV")]
    CascadeInfeasible { photon_ev: f64 },
    #[error("no live emitters")]
    NoLiveEmitters,
    #[error("smallest allowed dose shifts {predicted_ghz:.4} GHz, more than the {gap_ghz:.4} GHz gap")]
    GapTooSmallForDose { predicted_ghz: f64, gap_ghz: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown emitter {0}")]
    UnknownEmitter(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
