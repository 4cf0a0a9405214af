use serde::{Deserialize, Serialize};

use crate::units::HC_EV_NM;

/// Guest energy thresholds in eV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevels {
    /// First excited singlet.
    pub e_s1: f64,
    /// Lowest higher-lying state reached by a second photon.
    pub e_high: f64,
    /// Matrix → guest cation charge-transfer threshold.
    pub e_hole_transfer: f64,
}

impl EnergyLevels {
    pub fn is_valid(&self) -> bool {
        self.e_high > self.e_s1 && self.e_s1 > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeFeasibility {
    pub two_photon_ionization: bool,
    pub hole_transfer: bool,
}

pub fn photon_energy(wavelength_nm: f64) -> f64 {
    HC_EV_NM / wavelength_nm
}

pub fn cascade_feasible(levels: &EnergyLevels, pump_wavelength_nm: f64) -> CascadeFeasibility {
    feasible_at(levels, photon_energy(pump_wavelength_nm))
}

pub(crate) fn feasible_at(levels: &EnergyLevels, photon_ev: f64) -> CascadeFeasibility {
    CascadeFeasibility {
        two_photon_ionization: 2.0 * photon_ev >= levels.e_high,
        hole_transfer: photon_ev >= levels.e_hole_transfer,
    }
}
