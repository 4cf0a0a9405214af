//! Synthetic excitation spectra and everything inferred from them.

mod fit;
pub mod io;
mod peaks;
mod power_law;
mod spectrum;
mod track;

pub use fit::{fit_lorentzian, FitOptions, PeakFit};
pub use peaks::{detect_peaks, PeakCandidate, SMOOTHING_WINDOW};
pub use power_law::{fit_power_law, fit_power_law_red_only, PowerLawFit};
pub use spectrum::{synthesize_spectrum, InstrumentNoise, ScanConfig, Spectrum};
pub use track::{track_peaks, TrackEntry, TrackState, TrackStatus};
