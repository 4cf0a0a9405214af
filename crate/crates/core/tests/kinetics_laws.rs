use approx::assert_relative_eq;
use proptest::prelude::*;
use zpltune::kinetics::{apply_burst, evolve_idle, predict_shift, KineticsParams, KineticsState};
use zpltune::{seeded_rng, Detuning};

fn run(params: KineticsParams, bursts: &[(f64, f64)]) -> KineticsState {
    let mut rng = seeded_rng(7);
    let mut s = KineticsState::new(params, Detuning(3.0));
    for &(p, dt) in bursts {
        s = apply_burst(&s, p, dt, &mut rng).0;
    }
    s
}

#[test]
fn fixed_power_follows_the_closed_form() {
    let params = KineticsParams::without_hazards(0.7, 0.45, -1.0);
    let s = run(params, &[(2.0, 1.5), (2.0, 4.0), (2.0, 0.25)]);
    assert_relative_eq!(s.frequency().0, 3.0 - 0.7 * 2.0 * 5.75f64.powf(0.45), max_relative = 1e-12);
}

proptest! {
    #[test]
    fn splitting_a_burst_changes_nothing(
        kappa in 0.05..2.0f64, alpha in 0.1..1.2f64, p in 0.1..8.0f64,
        t1 in 0.01..30.0f64, t2 in 0.01..30.0f64,
    ) {
        let params = KineticsParams::without_hazards(kappa, alpha, -1.0);
        let whole = run(params, &[(p, t1 + t2)]).frequency().0;
        let split = run(params, &[(p, t1), (p, t2)]).frequency().0;
        prop_assert!((whole - split).abs() <= 1e-9 * whole.abs().max(1.0));
    }

    #[test]
    fn shift_is_monotone_and_signed(
        kappa in 0.05..2.0f64, alpha in 0.1..1.2f64, sign in prop::sample::select(vec![-1.0, 1.0]),
        bursts in prop::collection::vec((0.05..8.0f64, 0.01..20.0f64), 1..12),
    ) {
        let params = KineticsParams::without_hazards(kappa, alpha, sign);
        let mut rng = seeded_rng(1);
        let mut s = KineticsState::new(params, Detuning(0.0));
        for (p, dt) in bursts {
            let predicted = predict_shift(&s, p, dt);
            let next = apply_burst(&s, p, dt, &mut rng).0;
            let moved = next.frequency().0 - s.frequency().0;
            prop_assert!(moved * sign >= 0.0);
            prop_assert!((moved - predicted).abs() <= 1e-9 * moved.abs().max(1e-9));
            prop_assert!(next.consistency_residual().abs() <= 1e-9 * next.current_shift.abs().max(1.0));
            s = next;
        }
        prop_assert_eq!(evolve_idle(&s, 86_400.0), s);
    }

    #[test]
    fn stronger_bursts_shift_further(kappa in 0.05..2.0f64, alpha in 0.1..1.2f64, p in 0.1..4.0f64, dt in 0.1..10.0f64) {
        let params = KineticsParams::without_hazards(kappa, alpha, -1.0);
        let weak = run(params, &[(p, dt)]).frequency().0;
        let strong = run(params, &[(2.0 * p, dt)]).frequency().0;
        let longer = run(params, &[(p, 2.0 * dt)]).frequency().0;
        prop_assert!(strong < weak);
        prop_assert!(longer < weak);
        // β is linear in P: doubling power doubles a fresh shift.
        prop_assert!(((strong - 3.0) - 2.0 * (weak - 3.0)).abs() <= 1e-9 * (strong - 3.0).abs());
    }
}
