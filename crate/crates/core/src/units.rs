//! Canonical units and conversion constants.
//!
//! | quantity  | unit |
//! |-----------|------|
//! | position  | µm   |
//! | field     | MV/m |
//! | frequency | GHz (linewidths in MHz) |
//! | power     | mW   |
//! | time      | s    |
//! | energy    | eV   |

/// e / (4π ε0) expressed in (MV/m)·µm².
///
/// 8.987_551_792e9 N·m²/C² × 1.602_176_634e-19 C = 1.439_964_5e-9 V·m,
/// and 1 V·m = 1e12 V/m·µm² = 1e6 MV/m·µm².
pub const COULOMB_MV_UM2: f64 = 1.439_964_547e-3;

/// h·c in eV·nm.
pub const HC_EV_NM: f64 = 1239.84;

pub const NM_PER_UM: f64 = 1000.0;
pub const MHZ_PER_GHZ: f64 = 1000.0;

/// Exclusion radius around probe points for field evaluation (1 nm).
pub const EXCLUSION_RADIUS_UM: f64 = 1e-3;

/// Speed of light in nm·GHz.
pub const C_NM_GHZ: f64 = 2.997_924_58e8;

#[inline]
pub fn nm_to_um(nm: f64) -> f64 {
    nm / NM_PER_UM
}

#[inline]
pub fn um_to_nm(um: f64) -> f64 {
    um * NM_PER_UM
}

#[inline]
pub fn mhz_to_ghz(mhz: f64) -> f64 {
    mhz / MHZ_PER_GHZ
}

#[inline]
pub fn ghz_to_mhz(ghz: f64) -> f64 {
    ghz * MHZ_PER_GHZ
}

/// Optical frequency in GHz of a vacuum wavelength in nm.
#[inline]
pub fn wavelength_to_ghz(nm: f64) -> f64 {
    C_NM_GHZ / nm
}
