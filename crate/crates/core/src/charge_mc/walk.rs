use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use super::world::{CascadeRates, ChargeWorld};
use crate::units::nm_to_um;
use crate::{SimRng, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairOutcome {
    Trapped { electron: Vec3, hole: Vec3 },
    Recombined,
}

fn isotropic(rng: &mut SimRng) -> Vec3 {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vec3::new(x, y, z)
}

/// Walks an electron–hole pair launched from `site` until both trap or the
/// pair recombines. Trap cells claimed by the pair are committed to the
/// world's occupancy only when both carriers trap.
pub fn propagate_pair(site: &Vec3, world: &ChargeWorld, rates: &CascadeRates, rng: &mut SimRng) -> PairOutcome {
    let step_e = nm_to_um(rates.step_e_nm);
    let step_h = nm_to_um(rates.step_h_nm);
    let recomb2 = nm_to_um(rates.recomb_radius_nm).powi(2);
    let mut e = *site;
    let mut h = *site;
    let mut e_cell = None;
    let mut h_cell = None;
    for _ in 0..rates.max_steps {
        if e_cell.is_none() {
            e += isotropic(rng) * step_e;
        }
        if h_cell.is_none() {
            h += isotropic(rng) * step_h;
        }
        if (e - h).norm_squared() < recomb2 {
            return PairOutcome::Recombined;
        }
        if e_cell.is_none() && rng.random::<f64>() < rates.trap_prob {
            e_cell = world.free_trap_cell(&e).filter(|c| Some(*c) != h_cell);
        }
        if h_cell.is_none() && rng.random::<f64>() < rates.trap_prob {
            h_cell = world.free_trap_cell(&h).filter(|c| Some(*c) != e_cell);
        }
        if e_cell.is_some() && h_cell.is_some() {
            return PairOutcome::Trapped { electron: e, hole: h };
        }
    }
    PairOutcome::Recombined
}

/// Re-walks a single released carrier until it traps again; `None` if it
/// fails within `max_steps`.
pub(crate) fn walk_carrier(
    start: &Vec3,
    step_nm: f64,
    world: &ChargeWorld,
    rates: &CascadeRates,
    rng: &mut SimRng,
) -> Option<Vec3> {
    let step = nm_to_um(step_nm);
    let mut p = *start;
    for _ in 0..rates.max_steps {
        p += isotropic(rng) * step;
        if rng.random::<f64>() < rates.trap_prob && world.free_trap_cell(&p).is_some() {
            return Some(p);
        }
    }
    None
}
