//! Host-matrix presets.
//!
//! Stark coefficients, kinetics ranges and transport parameters are model
//! assumptions chosen so that the simulated shifts land on the scales seen in
//! experiments (tens to ~100 GHz for minute-long bursts of a few mW); only
//! the wavelengths and energy thresholds are measured quantities.

use serde::{Deserialize, Serialize};

use crate::charge_mc::{photon_energy, CascadeRates, DonorLayout, EnergyLevels};
use crate::kinetics::KineticsRanges;
use crate::stark::StarkResponse;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostMatrix {
    /// Anthracene nanocrystals: centrosymmetric site, quadratic red-only shifts.
    Anthracene,
    /// 2,3-dibromonaphthalene flakes: linear Stark response, both signs.
    Dibromonaphthalene,
}

impl HostMatrix {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Anthracene => "anthracene",
            Self::Dibromonaphthalene => "dibromonaphthalene",
        }
    }

    /// Probe (ZPL) wavelength, nm.
    pub fn reference_wavelength(&self) -> f64 {
        match self {
            Self::Anthracene => 785.0,
            Self::Dibromonaphthalene => 756.0,
        }
    }

    /// Default pump wavelength, nm.
    pub fn pump_wavelength(&self) -> f64 {
        match self {
            Self::Anthracene => 765.8,
            Self::Dibromonaphthalene => 630.0,
        }
    }

    /// Typical ZPL width, MHz.
    pub fn linewidth(&self) -> f64 {
        match self {
            Self::Anthracene => 60.0,
            Self::Dibromonaphthalene => 55.0,
        }
    }

    pub fn is_red_only(&self) -> bool {
        matches!(self, Self::Anthracene)
    }

    pub fn stark_response(&self) -> StarkResponse {
        match self {
            Self::Anthracene => StarkResponse::quadratic(ANTHRACENE_QUADRATIC),
            Self::Dibromonaphthalene => StarkResponse::linear(Vec3::new(0.0, 0.0, DBN_LINEAR)),
        }
    }

    pub fn energy_levels(&self) -> EnergyLevels {
        EnergyLevels { e_s1: photon_energy(self.reference_wavelength()), e_high: 3.0, e_hole_transfer: 1.6 }
    }

    pub fn kinetics_ranges(&self) -> KineticsRanges {
        let (kappa, alpha) = match self {
            Self::Anthracene => ((0.25, 1.0), (0.3, 0.9)),
            Self::Dibromonaphthalene => ((0.05, 0.15), (0.3, 0.9)),
        };
        KineticsRanges {
            kappa,
            alpha,
            alpha_prior: 0.55,
            red_only: self.is_red_only(),
            bleach_coeff: 1e-4,
            jump_prob: 0.01,
            jump_scale: 1.0,
        }
    }

    pub fn cascade_rates(&self) -> CascadeRates {
        match self {
            Self::Anthracene => CascadeRates::default(),
            // Lower two-photon yield at 630 nm; keeps minute-scale shifts at a few GHz.
            Self::Dibromonaphthalene => CascadeRates { sigma_ion: 5.0, ..CascadeRates::default() },
        }
    }

    pub fn donor_layout(&self) -> DonorLayout {
        DonorLayout::default()
    }
}

/// GHz per (MV/m)².
pub const ANTHRACENE_QUADRATIC: f64 = -4e-5;
/// GHz per MV/m along the molecular axis.
pub const DBN_LINEAR: f64 = 0.01;

/// Default relative permittivity for both hosts.
pub const EPSILON_R: f64 = 3.0;

impl std::str::FromStr for HostMatrix {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "anthracene" | "ac" => Ok(Self::Anthracene),
            "dibromonaphthalene" | "dbn" => Ok(Self::Dibromonaphthalene),
            _ => Err(crate::Error::InvalidArgument(format!("unknown host preset {s:?}"))),
        }
    }
}
