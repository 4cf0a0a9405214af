//! Microscopic model of pump-induced charge separation.
//!
//! Donor molecules inside the pump focus are ionized at a rate linear in the
//! local intensity (the intermediate S1 step is taken as saturated). Each
//! event launches an electron and a hole on independent isotropic random
//! walks; carriers trap with a fixed probability per step on free trap cells
//! away from guest molecules, and a pair whose carriers meet, or which fails
//! to trap within `max_steps`, recombines. Trapped charges are permanent
//! without light and their Coulomb field Stark-shifts the emitters.

mod energetics;
mod walk;
mod world;

pub use energetics::{cascade_feasible, photon_energy, CascadeFeasibility, EnergyLevels};
pub use walk::{propagate_pair, PairOutcome};
pub use world::{
    ionization_events, shift_of, step_world, BeamProfile, CascadeRates, ChargeWorld, DonorLayout, StepSummary,
    WorldSnapshot,
};
