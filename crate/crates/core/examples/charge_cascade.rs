//! Microscopic picture: a focused pump ionizes donors near one molecule, the
//! carriers trap nearby, and only that molecule shifts.

use zpltune::charge_mc::{cascade_feasible, step_world, BeamProfile, ChargeWorld};
use zpltune::{seeded_rng, EmitterState, HostMatrix, Vec3};

fn main() -> zpltune::Result<()> {
    let host = HostMatrix::Dibromonaphthalene;
    let f = cascade_feasible(&host.energy_levels(), host.pump_wavelength());
    println!("{}: two-photon ionization {}, hole transfer {}", host.name(), f.two_photon_ionization, f.hole_transfer);

    let mut near = EmitterState::new("near", Vec3::zeros(), 0.0);
    let mut far = EmitterState::new("far", Vec3::new(15.0, 0.0, 0.0), 0.0);
    near.axis = Vec3::new(0.3, 0.2, 0.93).normalize();
    far.axis = near.axis;
    let seed = 7;
    let mut rng = seeded_rng(seed);
    let rates = host.cascade_rates();
    let emitters = [near, far];
    let mut world = ChargeWorld::around_emitters(
        &emitters,
        &host.donor_layout(),
        host.energy_levels(),
        &rates,
        zpltune::host::EPSILON_R,
        seed,
        &mut rng,
    );
    let beam = BeamProfile::at(0.0, 0.0, 6.0, host.pump_wavelength());
    let response = host.stark_response();
    for burst in 1..=5 {
        let s = step_world(&mut world, &beam, 5.0, &rates, &mut rng)?;
        let shifts: Vec<f64> =
            emitters.iter().enumerate().map(|(i, e)| world.probe_shift(i, &response, &e.axis)).collect();
        println!(
            "burst {burst}: {} events, {} trapped, shift near {:+.3} GHz, far {:+.6} GHz",
            s.events, s.trapped, shifts[0], shifts[1]
        );
    }
    Ok(())
}
