//! Simulation, inference and closed-loop control for laser-induced frequency
//! tuning of single-molecule emitters.
//!
//! The crate is organised bottom-up:
//!
//! * [`units`] and [`stark`]: point-charge fields, Stark shifts and the
//!   Lorentzian line primitive.
//! * [`lineshape`]: synthetic excitation spectra, peak detection, Lorentzian
//!   and power-law fitting, peak tracking.
//! * [`kinetics`]: the phenomenological power-law shift engine with dose
//!   bookkeeping and bleach/jump hazards.
//! * [`charge_mc`]: a Monte Carlo of photoionization, carrier random walks and
//!   trapping, whose accumulated charges Stark-shift the emitters.
//! * [`tuner`]: target selection, dose planning, online parameter estimation
//!   and the probe/fit/burst synchronization loop.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charge_mc;
pub mod emitter;
pub mod error;
pub mod host;
pub mod kinetics;
pub mod lineshape;
pub mod stark;
pub mod tuner;
pub mod units;

pub use emitter::{EmitterId, EmitterState};
pub use error::{Error, Result};
pub use host::HostMatrix;
pub use stark::{Detuning, ElectricField, PointCharge, StarkResponse};

/// Random stream used everywhere in the simulation.
///
/// ChaCha exposes its word position, which the session layer records as a
/// draw counter.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Seeded constructor for [`SimRng`].
pub fn seeded_rng(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

/// Number of 32-bit words consumed from the stream so far.
pub fn draw_count(rng: &SimRng) -> u128 {
    rng.get_word_pos()
}

pub type Vec3 = nalgebra::Vector3<f64>;
