//! Point-charge fields, Stark shifts and the Lorentzian line primitive.

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{mhz_to_ghz, COULOMB_MV_UM2, EXCLUSION_RADIUS_UM};
use crate::Vec3;

/// Frequency offset in GHz from the host's reference line.
///
/// Red shifts (longer wavelength) are negative changes.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Detuning(pub f64);

impl Detuning {
    pub fn ghz(self) -> f64 {
        self.0
    }
}

impl std::ops::Add<f64> for Detuning {
    type Output = Detuning;
    fn add(self, rhs: f64) -> Detuning {
        Detuning(self.0 + rhs)
    }
}

impl std::ops::Sub for Detuning {
    type Output = f64;
    fn sub(self, rhs: Detuning) -> f64 {
        self.0 - rhs.0
    }
}

/// Static electric field in MV/m.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElectricField(pub Vec3);

impl ElectricField {
    pub fn zero() -> Self {
        Self(Vec3::zeros())
    }

    pub fn magnitude(&self) -> f64 {
        self.0.norm()
    }
}

impl std::ops::Add for ElectricField {
    type Output = ElectricField;
    fn add(self, rhs: ElectricField) -> ElectricField {
        ElectricField(self.0 + rhs.0)
    }
}

impl std::ops::Neg for ElectricField {
    type Output = ElectricField;
    fn neg(self) -> ElectricField {
        ElectricField(-self.0)
    }
}

/// Trapped elementary charge (±1 e) at a position in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointCharge {
    pub position: Vec3,
    pub charge: i8,
}

impl PointCharge {
    pub fn new(position: Vec3, charge: i8) -> Self {
        debug_assert!(charge == 1 || charge == -1);
        Self { position, charge }
    }
}

/// Linear and quadratic Stark response of a guest in a given host.
///
/// `linear_coeff` lives in the molecular frame (GHz per MV/m); the molecular
/// z axis is mapped onto the emitter's `axis`. `quadratic_coeff` is in GHz per
/// (MV/m)² and is negative for a red-shifting quadratic response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkResponse {
    pub linear_coeff: Vec3,
    pub quadratic_coeff: f64,
}

impl StarkResponse {
    pub fn quadratic(q: f64) -> Self {
        Self { linear_coeff: Vec3::zeros(), quadratic_coeff: q }
    }

    pub fn linear(coeff: Vec3) -> Self {
        Self { linear_coeff: coeff, quadratic_coeff: 0.0 }
    }

    /// True when no linear term exists and the quadratic term only red-shifts.
    pub fn is_red_only(&self) -> bool {
        self.linear_coeff.norm() == 0.0 && self.quadratic_coeff <= 0.0
    }

    /// Linear coefficient rotated into the lab frame for a molecule whose
    /// molecular z axis points along `axis`.
    pub fn lab_linear_coeff(&self, axis: &Vec3) -> Vec3 {
        molecular_to_lab(axis) * self.linear_coeff
    }
}

/// Rotation taking the molecular z axis onto `axis`.
pub fn molecular_to_lab(axis: &Vec3) -> Rotation3<f64> {
    let z = Vec3::z();
    match Rotation3::rotation_between(&z, axis) {
        Some(r) => r,
        // antiparallel: half turn about x
        None => Rotation3::from_axis_angle(&Unit::new_unchecked(Vec3::x()), std::f64::consts::PI),
    }
}

/// Coulomb superposition of point charges at `point`, screened by `epsilon_r`.
pub fn field_at(charges: &[PointCharge], point: &Vec3, epsilon_r: f64) -> Result<ElectricField> {
    if !(epsilon_r >= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon_r must be >= 1, got {epsilon_r}")));
    }
    let r2_min = EXCLUSION_RADIUS_UM * EXCLUSION_RADIUS_UM;
    let mut acc = Vec3::zeros();
    for c in charges {
        let d = point - c.position;
        let r2 = d.norm_squared();
        if r2 < r2_min {
            return Err(Error::ChargeAtProbe { radius_um: EXCLUSION_RADIUS_UM });
        }
        acc += d * (f64::from(c.charge) / (r2 * r2.sqrt()));
    }
    Ok(ElectricField(acc * (COULOMB_MV_UM2 / epsilon_r)))
}

/// Stark shift in GHz: −(μ·E) + ½ q |E|², μ being the lab-frame linear coefficient.
pub fn stark_shift(field: &ElectricField, response: &StarkResponse, axis: &Vec3) -> f64 {
    let e = &field.0;
    let linear = if response.linear_coeff.norm_squared() > 0.0 { -response.lab_linear_coeff(axis).dot(e) } else { 0.0 };
    linear + 0.5 * response.quadratic_coeff * e.norm_squared()
}

/// L(ν) = A (Γ/2)² / ((ν − ν0)² + (Γ/2)²) + B with ν, ν0 in GHz and Γ in MHz.
#[inline]
pub fn lorentzian(nu: f64, center: f64, gamma_fwhm_mhz: f64, amplitude: f64, background: f64) -> f64 {
    let hw = 0.5 * mhz_to_ghz(gamma_fwhm_mhz);
    let d = nu - center;
    amplitude * hw * hw / (d * d + hw * hw) + background
}
