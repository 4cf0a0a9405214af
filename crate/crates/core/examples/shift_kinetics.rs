//! Drives one emitter with repeated pump bursts and recovers the power-law
//! exponent from the accumulated shift.

use zpltune::kinetics::{apply_burst, KineticsParams, KineticsState};
use zpltune::lineshape::fit_power_law_red_only;
use zpltune::{seeded_rng, Detuning};

fn main() -> zpltune::Result<()> {
    let mut rng = seeded_rng(1);
    let params = KineticsParams::without_hazards(0.05, 0.4, -1.0);
    let mut state = KineticsState::new(params, Detuning(0.0));
    let (power, dt) = (2.0, 1.0);
    let (mut times, mut centers) = (Vec::new(), Vec::new());
    for k in 1..=40 {
        let (next, _) = apply_burst(&state, power, dt, &mut rng);
        state = next;
        times.push(k as f64 * dt);
        centers.push(state.frequency().ghz());
    }
    let fit = fit_power_law_red_only(&times, &centers)?;
    println!("after {:.0} s at {power} mW: {:.3} GHz", times[39], centers[39]);
    println!("fitted alpha {:.3} (true {}), beta {:.4} GHz", fit.alpha, params.alpha, fit.beta);
    Ok(())
}
