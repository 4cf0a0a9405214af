use serde::{Deserialize, Serialize};

use crate::stark::Detuning;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmitterId(pub String);

impl EmitterId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }
}

impl From<&str> for EmitterId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for EmitterId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl std::fmt::Display for EmitterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// One guest molecule as seen by the bench.
///
/// `zpl` is the unperturbed line position; shifts accumulated by the pump are
/// kept by the backends and added on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterState {
    pub id: EmitterId,
    /// µm
    pub position: Vec3,
    /// Unit vector; molecular z axis in the lab frame.
    pub axis: Vec3,
    pub zpl: Detuning,
    /// FWHM in MHz.
    pub linewidth: f64,
    /// counts/s at line center
    pub peak_rate: f64,
    pub alive: bool,
}

impl EmitterState {
    pub fn new(id: impl Into<String>, position: Vec3, zpl: f64) -> Self {
        Self {
            id: EmitterId::new(id),
            position,
            axis: Vec3::z(),
            zpl: Detuning(zpl),
            linewidth: 60.0,
            peak_rate: 20_000.0,
            alive: true,
        }
    }

    pub fn validate(&self, linewidth_band: (f64, f64)) -> crate::Result<()> {
        use crate::Error::InvalidArgument;
        if (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(InvalidArgument(format!("emitter {}: axis is not a unit vector", self.id)));
        }
        if !(self.linewidth >= linewidth_band.0 && self.linewidth <= linewidth_band.1) {
            return Err(InvalidArgument(format!(
                "emitter {}: linewidth {} MHz outside [{}, {}]",
                self.id, self.linewidth, linewidth_band.0, linewidth_band.1
            )));
        }
        if !(self.peak_rate > 0.0) {
            return Err(InvalidArgument(format!("emitter {}: peak_rate must be positive", self.id)));
        }
        if !self.zpl.0.is_finite() {
            return Err(InvalidArgument(format!("emitter {}: zpl is not finite", self.id)));
        }
        Ok(())
    }
}

/// Default accepted linewidth band in MHz.
pub const LINEWIDTH_BAND_MHZ: (f64, f64) = (40.0, 60.0);
