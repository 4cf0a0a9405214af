use rustc_hash::FxHashSet;

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::{Distribution, Poisson, UnitSphere};
use serde::{Deserialize, Serialize};

use super::energetics::{cascade_feasible, photon_energy, EnergyLevels};
use super::walk::{propagate_pair, walk_carrier, PairOutcome};
use crate::emitter::EmitterState;
use crate::error::{Error, Result};
use crate::stark::{field_at, stark_shift, ElectricField, PointCharge, StarkResponse};
use crate::units::{nm_to_um, COULOMB_MV_UM2};
use crate::{SimRng, Vec3};

/// Gaussian pump focus in the z = 0 focal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamProfile {
    /// µm
    pub center: Vector2<f64>,
    /// 1/e² intensity radius, µm
    pub waist: f64,
    /// mW
    pub power: f64,
    /// nm
    pub wavelength: f64,
}

impl BeamProfile {
    pub fn at(x: f64, y: f64, power: f64, wavelength: f64) -> Self {
        Self { center: Vector2::new(x, y), waist: 0.5, power, wavelength }
    }

    /// g(r) = exp(−2 r²/w²) with r the lateral distance from the beam axis.
    pub fn relative_intensity(&self, p: &Vec3) -> f64 {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        (-2.0 * (dx * dx + dy * dy) / (self.waist * self.waist)).exp()
    }
}

/// Ionization and transport parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeRates {
    /// Ionization events per mW·s per donor at the beam center.
    pub sigma_ion: f64,
    pub step_e_nm: f64,
    pub step_h_nm: f64,
    /// Trapping probability per step on a free trap cell.
    pub trap_prob: f64,
    pub max_steps: u32,
    pub recomb_radius_nm: f64,
    /// No trapping within this distance of a guest molecule.
    pub keep_out_nm: f64,
    /// Edge of a trap cell; each cell holds one carrier.
    pub trap_cell_nm: f64,
    /// Light-assisted release of trapped carriers, per mW·s at the beam
    /// center. Zero disables migration.
    pub migration_prob: f64,
}

impl Default for CascadeRates {
    fn default() -> Self {
        Self {
            sigma_ion: 50.0,
            step_e_nm: 20.0,
            step_h_nm: 2.0,
            trap_prob: 0.05,
            max_steps: 2000,
            recomb_radius_nm: 2.0,
            keep_out_nm: 12.0,
            trap_cell_nm: 3.0,
            migration_prob: 0.0,
        }
    }
}

/// Placement of non-resonant donor molecules around each emitter.
///
/// Donors sit inside a cone around a random per-emitter direction (the
/// emitter is off-center in its crystal), at log-uniform distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DonorLayout {
    pub per_emitter: usize,
    /// Donor distance range from its emitter, nm.
    pub shell_nm: (f64, f64),
    /// Half-angle of the donor cone, degrees; 180 is isotropic.
    pub cone_half_angle_deg: f64,
    /// Whether the resonant emitters are ionized themselves.
    pub emitters_are_donors: bool,
}

impl Default for DonorLayout {
    fn default() -> Self {
        Self { per_emitter: 12, shell_nm: (25.0, 150.0), cone_half_angle_deg: 45.0, emitters_are_donors: false }
    }
}

fn cone_direction(axis: &Vec3, half_angle_deg: f64, rng: &mut SimRng) -> Vec3 {
    let cos_max = half_angle_deg.to_radians().cos();
    let cos_t = 1.0 - rng.random::<f64>() * (1.0 - cos_max);
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = axis.cross(&helper).normalize();
    let v = axis.cross(&u);
    axis * cos_t + (u * phi.cos() + v * phi.sin()) * sin_t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub charges: Vec<PointCharge>,
    pub donor_sites: Vec<Vec3>,
    pub seed: u64,
    pub event_count: u64,
    pub trapped_pairs: u64,
    pub recombined_pairs: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSummary {
    pub events: u64,
    pub trapped: u64,
    pub recombined: u64,
    pub migrated: u64,
}

/// Trapped charges and the molecules they were generated from.
#[derive(Debug, Clone)]
pub struct ChargeWorld {
    pub charges: Vec<PointCharge>,
    pub donor_sites: Vec<Vec3>,
    /// Guest molecules (donors and emitters) around which nothing traps.
    pub protected_sites: Vec<Vec3>,
    pub levels: EnergyLevels,
    pub seed: u64,
    pub event_count: u64,
    pub trapped_pairs: u64,
    pub recombined_pairs: u64,
    keep_out_um: f64,
    cell_um: f64,
    occupied: FxHashSet<[i64; 3]>,
    epsilon_r: f64,
    probes: Vec<Vec3>,
    probe_fields: Vec<Vec3>,
}

impl ChargeWorld {
    pub fn new(
        levels: EnergyLevels,
        donor_sites: Vec<Vec3>,
        protected_sites: Vec<Vec3>,
        rates: &CascadeRates,
        epsilon_r: f64,
        seed: u64,
    ) -> Self {
        Self {
            charges: Vec::new(),
            donor_sites,
            protected_sites,
            levels,
            seed,
            event_count: 0,
            trapped_pairs: 0,
            recombined_pairs: 0,
            keep_out_um: nm_to_um(rates.keep_out_nm.max(1.0)),
            cell_um: nm_to_um(rates.trap_cell_nm),
            occupied: FxHashSet::default(),
            epsilon_r,
            probes: Vec::new(),
            probe_fields: Vec::new(),
        }
    }

    /// Donors drawn around each emitter according to `layout`; emitter
    /// positions are registered as probes in the given order.
    pub fn around_emitters(
        emitters: &[EmitterState],
        layout: &DonorLayout,
        levels: EnergyLevels,
        rates: &CascadeRates,
        epsilon_r: f64,
        seed: u64,
        rng: &mut SimRng,
    ) -> Self {
        let mut donors = Vec::new();
        let mut protected = Vec::new();
        for e in emitters {
            protected.push(e.position);
            if layout.emitters_are_donors {
                donors.push(e.position);
            }
            let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
            let axis = Vec3::new(x, y, z);
            for _ in 0..layout.per_emitter {
                let dir = cone_direction(&axis, layout.cone_half_angle_deg, rng);
                let (lo, hi) = layout.shell_nm;
                let r = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
                let d = e.position + dir * nm_to_um(r);
                donors.push(d);
                protected.push(d);
            }
        }
        let mut w = Self::new(levels, donors, protected, rates, epsilon_r, seed);
        for e in emitters {
            w.register_probe(e.position);
        }
        w
    }

    pub fn register_probe(&mut self, p: Vec3) -> usize {
        let f = field_at(&self.charges, &p, self.epsilon_r).map(|f| f.0).unwrap_or_else(|_| Vec3::zeros());
        self.probes.push(p);
        self.probe_fields.push(f);
        self.probes.len() - 1
    }

    /// Incrementally maintained field at a registered probe, MV/m.
    pub fn probe_field(&self, idx: usize) -> Vec3 {
        self.probe_fields[idx]
    }

    /// Stark shift at a registered probe from the cached field, GHz.
    pub fn probe_shift(&self, idx: usize, response: &StarkResponse, axis: &Vec3) -> f64 {
        stark_shift(&ElectricField(self.probe_fields[idx]), response, axis)
    }

    pub fn net_charge(&self) -> i64 {
        self.charges.iter().map(|c| i64::from(c.charge)).sum()
    }

    fn cell_of(&self, p: &Vec3) -> [i64; 3] {
        [(p.x / self.cell_um).floor() as i64, (p.y / self.cell_um).floor() as i64, (p.z / self.cell_um).floor() as i64]
    }

    /// The trap cell at `p` if it is empty and clear of guest molecules.
    pub fn free_trap_cell(&self, p: &Vec3) -> Option<[i64; 3]> {
        let k2 = self.keep_out_um * self.keep_out_um;
        if self.protected_sites.iter().any(|s| (s - p).norm_squared() < k2) {
            return None;
        }
        let c = self.cell_of(p);
        (!self.occupied.contains(&c)).then_some(c)
    }

    fn contribution(&self, probe: &Vec3, c: &PointCharge) -> Vec3 {
        let d = probe - c.position;
        let r2 = d.norm_squared();
        d * (f64::from(c.charge) * COULOMB_MV_UM2 / (self.epsilon_r * r2 * r2.sqrt()))
    }

    fn add_charge(&mut self, c: PointCharge) {
        self.occupied.insert(self.cell_of(&c.position));
        for k in 0..self.probes.len() {
            let f = self.contribution(&self.probes[k], &c);
            self.probe_fields[k] += f;
        }
        self.charges.push(c);
    }

    fn move_charge(&mut self, idx: usize, to: Vec3) {
        let old = self.charges[idx];
        let new = PointCharge { position: to, charge: old.charge };
        for k in 0..self.probes.len() {
            let f = self.contribution(&self.probes[k], &new) - self.contribution(&self.probes[k], &old);
            self.probe_fields[k] += f;
        }
        self.occupied.remove(&self.cell_of(&old.position));
        self.occupied.insert(self.cell_of(&to));
        self.charges[idx] = new;
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            charges: self.charges.clone(),
            donor_sites: self.donor_sites.clone(),
            seed: self.seed,
            event_count: self.event_count,
            trapped_pairs: self.trapped_pairs,
            recombined_pairs: self.recombined_pairs,
        }
    }
}

fn check_feasible(world: &ChargeWorld, beam: &BeamProfile, duration: f64) -> Result<()> {
    if beam.power > 0.0 && duration > 0.0 && !cascade_feasible(&world.levels, beam.wavelength).two_photon_ionization {
        return Err(Error::CascadeInfeasible { photon_ev: photon_energy(beam.wavelength) });
    }
    Ok(())
}

/// Ionization sites for one exposure: Poisson(σ·P·g(r)·Δt) events per donor.
pub fn ionization_events(
    beam: &BeamProfile,
    world: &ChargeWorld,
    duration: f64,
    rates: &CascadeRates,
    rng: &mut SimRng,
) -> Result<Vec<Vec3>> {
    if !(duration >= 0.0) || !(beam.power >= 0.0) || !(beam.waist > 0.0) {
        return Err(Error::InvalidArgument("negative duration or power, or non-positive waist".into()));
    }
    check_feasible(world, beam, duration)?;
    let mut sites = Vec::new();
    if beam.power == 0.0 || duration == 0.0 {
        return Ok(sites);
    }
    for d in &world.donor_sites {
        let mean = rates.sigma_ion * beam.power * beam.relative_intensity(d) * duration;
        if mean > 0.0 {
            let n = Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng) as usize;
            sites.extend(std::iter::repeat_n(*d, n));
        }
    }
    Ok(sites)
}

/// One exposure: ionize, walk every pair, then optionally migrate already
/// trapped carriers inside the beam.
pub fn step_world(
    world: &mut ChargeWorld,
    beam: &BeamProfile,
    duration: f64,
    rates: &CascadeRates,
    rng: &mut SimRng,
) -> Result<StepSummary> {
    let sites = ionization_events(beam, world, duration, rates, rng)?;
    let mut summary = StepSummary { events: sites.len() as u64, ..StepSummary::default() };
    for site in &sites {
        match propagate_pair(site, world, rates, rng) {
            PairOutcome::Trapped { electron, hole } => {
                world.add_charge(PointCharge::new(hole, 1));
                world.add_charge(PointCharge::new(electron, -1));
                summary.trapped += 1;
            }
            PairOutcome::Recombined => summary.recombined += 1,
        }
    }
    world.event_count += summary.events;
    world.trapped_pairs += summary.trapped;
    world.recombined_pairs += summary.recombined;

    if rates.migration_prob > 0.0 && beam.power > 0.0 && duration > 0.0 {
        for idx in 0..world.charges.len() {
            let c = world.charges[idx];
            let g = beam.relative_intensity(&c.position);
            if g < 1e-12 {
                continue;
            }
            let p = (rates.migration_prob * beam.power * g * duration).min(1.0);
            if rng.random::<f64>() >= p {
                continue;
            }
            let step = if c.charge < 0 { rates.step_e_nm } else { rates.step_h_nm };
            let cell = world.cell_of(&c.position);
            world.occupied.remove(&cell);
            match walk_carrier(&c.position, step, world, rates, rng) {
                Some(to) => {
                    world.occupied.insert(cell);
                    world.move_charge(idx, to);
                    summary.migrated += 1;
                }
                None => {
                    world.occupied.insert(cell);
                }
            }
        }
    }
    Ok(summary)
}

/// Stark shift of `emitter` in the field of every trapped charge, GHz.
pub fn shift_of(emitter: &EmitterState, world: &ChargeWorld, response: &StarkResponse, epsilon_r: f64) -> Result<f64> {
    let f = field_at(&world.charges, &emitter.position, epsilon_r)?;
    Ok(stark_shift(&f, response, &emitter.axis))
}
