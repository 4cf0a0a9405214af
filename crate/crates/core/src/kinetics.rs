//! Phenomenological shift kinetics.
//!
//! At fixed pump power P the line moves as ν(t) = ν(0) + sign·κP·(t/t0)^α with
//! t the cumulative exposure and t0 = 1 s. Across power changes the current
//! shift is mapped back to the exposure time that would have produced it at
//! the new power ("equivalent time") and the power law is advanced from there,
//! which keeps the trajectory continuous.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::stark::Detuning;
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticsParams {
    /// GHz per (mW · s^α); β(P) = κ·P.
    pub kappa: f64,
    pub alpha: f64,
    /// −1 for red shifts, +1 for blue.
    pub sign: f64,
    /// Bleaching probability per mW·s.
    pub bleach_coeff: f64,
    /// Probability of a spectral jump per burst.
    pub jump_prob: f64,
    /// Gaussian scale of a jump, GHz.
    pub jump_scale: f64,
}

impl KineticsParams {
    pub fn without_hazards(kappa: f64, alpha: f64, sign: f64) -> Self {
        Self { kappa, alpha, sign, bleach_coeff: 0.0, jump_prob: 0.0, jump_scale: 0.0 }
    }

    pub fn hazards_disabled(mut self) -> Self {
        self.bleach_coeff = 0.0;
        self.jump_prob = 0.0;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticsState {
    pub params: KineticsParams,
    pub nu_initial: Detuning,
    /// Exposure time at `last_power` reproducing `current_shift`, s.
    pub equivalent_time: f64,
    /// Signed power-law shift, GHz.
    pub current_shift: f64,
    /// Power of the most recent non-zero burst, mW.
    pub last_power: f64,
    /// Accumulated spectral-jump displacement, GHz.
    pub jump_offset: f64,
    /// Total dose, mW·s.
    pub dose: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurstOutcome {
    Shifted,
    Bleached,
    Jumped,
}

impl KineticsState {
    pub fn new(params: KineticsParams, nu_initial: Detuning) -> Self {
        Self {
            params,
            nu_initial,
            equivalent_time: 0.0,
            current_shift: 0.0,
            last_power: 0.0,
            jump_offset: 0.0,
            dose: 0.0,
        }
    }

    /// Current line position including jumps.
    pub fn frequency(&self) -> Detuning {
        self.nu_initial + (self.current_shift + self.jump_offset)
    }

    /// Residual of |shift| = κ·P_last·t_eq^α; zero up to rounding.
    pub fn consistency_residual(&self) -> f64 {
        let p = &self.params;
        if self.last_power == 0.0 {
            return self.current_shift.abs();
        }
        self.current_shift.abs() - p.kappa * self.last_power * self.equivalent_time.powf(p.alpha)
    }
}

/// Exposure time at `power` that reproduces a shift of magnitude `abs_shift`.
pub fn equivalent_time(abs_shift: f64, kappa: f64, alpha: f64, power: f64) -> f64 {
    if abs_shift == 0.0 {
        return 0.0;
    }
    (abs_shift / (kappa * power)).powf(1.0 / alpha)
}

/// Additional signed shift from a burst, without touching the state.
pub fn predict_shift(state: &KineticsState, power: f64, duration: f64) -> f64 {
    advance(state, power, duration).map_or(0.0, |(_, delta)| delta)
}

fn advance(state: &KineticsState, power: f64, duration: f64) -> Option<(f64, f64)> {
    let p = &state.params;
    if power <= 0.0 || duration <= 0.0 || p.kappa <= 0.0 {
        return None;
    }
    let kp = p.kappa * power;
    let t_prev = equivalent_time(state.current_shift.abs(), p.kappa, p.alpha, power);
    let t_next = t_prev + duration;
    // (|s| + Δ) written as κP·t_next^α avoids cancellation in the increment
    let delta = kp * t_next.powf(p.alpha) - kp * t_prev.powf(p.alpha);
    Some((t_next, p.sign * delta))
}

/// Applies one burst, drawing bleach and jump hazards.
///
/// Two uniforms are always drawn for a non-empty burst so that the random
/// stream advances identically whatever the hazard settings.
pub fn apply_burst(
    state: &KineticsState,
    power: f64,
    duration: f64,
    rng: &mut SimRng,
) -> (KineticsState, BurstOutcome) {
    let mut next = *state;
    let Some((t_next, delta)) = advance(state, power, duration) else {
        return (next, BurstOutcome::Shifted);
    };
    next.equivalent_time = t_next;
    next.current_shift = state.current_shift + delta;
    next.last_power = power;
    next.dose += power * duration;

    let p = &state.params;
    let u_bleach: f64 = rng.random();
    let u_jump: f64 = rng.random();
    if u_bleach < (p.bleach_coeff * power * duration).min(1.0) {
        return (next, BurstOutcome::Bleached);
    }
    if u_jump < p.jump_prob {
        let jump = Normal::new(0.0, p.jump_scale.max(0.0)).map_or(0.0, |n| n.sample(rng));
        next.jump_offset += jump;
        return (next, BurstOutcome::Jumped);
    }
    (next, BurstOutcome::Shifted)
}

/// The shift persists without light: no relaxation term.
pub fn evolve_idle(state: &KineticsState, _off_duration: f64) -> KineticsState {
    *state
}

/// Per-host sampling ranges for [`KineticsParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticsRanges {
    /// κ drawn log-uniformly in this range.
    pub kappa: (f64, f64),
    /// α drawn uniformly in this range.
    pub alpha: (f64, f64),
    /// Prior α used by the tuner before it has data.
    pub alpha_prior: f64,
    /// Red-only hosts always shift red; otherwise the sign is a fair coin.
    pub red_only: bool,
    pub bleach_coeff: f64,
    pub jump_prob: f64,
    pub jump_scale: f64,
}

impl KineticsRanges {
    pub fn kappa_prior(&self) -> f64 {
        (self.kappa.0 * self.kappa.1).sqrt()
    }

    pub fn without_hazards(mut self) -> Self {
        self.bleach_coeff = 0.0;
        self.jump_prob = 0.0;
        self
    }
}

pub fn sample_params(ranges: &KineticsRanges, rng: &mut SimRng) -> KineticsParams {
    let (klo, khi) = ranges.kappa;
    let kappa = if klo == khi { klo } else { (klo.ln() + rng.random::<f64>() * (khi.ln() - klo.ln())).exp() };
    let (alo, ahi) = ranges.alpha;
    let alpha = if alo == ahi { alo } else { alo + rng.random::<f64>() * (ahi - alo) };
    let sign = if ranges.red_only {
        -1.0
    } else if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    };
    KineticsParams {
        kappa,
        alpha,
        sign,
        bleach_coeff: ranges.bleach_coeff,
        jump_prob: ranges.jump_prob,
        jump_scale: ranges.jump_scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fresh(kappa: f64, alpha: f64) -> KineticsState {
        KineticsState::new(KineticsParams::without_hazards(kappa, alpha, -1.0), Detuning(0.0))
    }

    #[test]
    fn predict_examples() {
        assert_relative_eq!(predict_shift(&fresh(0.1, 1.0), 5.0, 120.0), -60.0, epsilon = 1e-9);
        assert_eq!(predict_shift(&fresh(0.1, 1.0), 0.0, 120.0), 0.0);
        // κP = 2 GHz/√s
        assert_relative_eq!(predict_shift(&fresh(0.4, 0.5), 5.0, 4.0), -4.0, epsilon = 1e-12);
    }

    #[test]
    fn hazard_free_burst_matches_prediction() {
        let mut rng = seeded_rng(1);
        let s = fresh(0.3, 0.6);
        let (s1, _) = apply_burst(&s, 2.0, 3.0, &mut rng);
        let p = predict_shift(&s1, 4.0, 1.5);
        let (s2, out) = apply_burst(&s1, 4.0, 1.5, &mut rng);
        assert_eq!(out, BurstOutcome::Shifted);
        assert_eq!(s2.current_shift, s1.current_shift + p);
        assert!(s2.consistency_residual().abs() < 1e-9);
    }

    #[test]
    fn dose_additivity_at_fixed_power() {
        let mut rng = seeded_rng(2);
        let s = fresh(0.3, 0.45);
        let (a, _) = apply_burst(&s, 3.0, 2.0, &mut rng);
        let (a, _) = apply_burst(&a, 3.0, 5.0, &mut rng);
        let (b, _) = apply_burst(&s, 3.0, 7.0, &mut rng);
        assert_relative_eq!(a.current_shift, b.current_shift, max_relative = 1e-12);
    }

    #[test]
    fn saturated_bleach_hazard() {
        let mut rng = seeded_rng(3);
        let mut p = KineticsParams::without_hazards(0.1, 0.5, -1.0);
        p.bleach_coeff = 0.1;
        let (_, out) = apply_burst(&KineticsState::new(p, Detuning(0.0)), 5.0, 2.0, &mut rng);
        assert_eq!(out, BurstOutcome::Bleached);
    }

    #[test]
    fn idle_keeps_shift() {
        let mut rng = seeded_rng(4);
        let mut s = fresh(1.0, 1.0);
        s = apply_burst(&s, 1.0, 100.0, &mut rng).0;
        assert_relative_eq!(s.current_shift, -100.0, epsilon = 1e-9);
        assert_eq!(evolve_idle(&s, 86_400.0), s);
        assert_eq!(evolve_idle(&s, 0.0), s);
        assert_eq!(evolve_idle(&s, 1e6).current_shift, s.current_shift);
    }

    fn ranges(red_only: bool) -> KineticsRanges {
        KineticsRanges {
            kappa: (0.05, 0.2),
            alpha: (0.3, 0.9),
            alpha_prior: 0.55,
            red_only,
            bleach_coeff: 0.0,
            jump_prob: 0.0,
            jump_scale: 1.0,
        }
    }

    #[test]
    fn sampling_sign_rules() {
        let mut rng = seeded_rng(5);
        assert!((0..1000).all(|_| sample_params(&ranges(true), &mut rng).sign == -1.0));
        let signs: Vec<f64> = (0..10_000).map(|_| sample_params(&ranges(false), &mut rng).sign).collect();
        assert!(signs.contains(&1.0) && signs.contains(&-1.0));
        let mut r = ranges(true);
        r.kappa = (0.7, 0.7);
        assert_eq!(sample_params(&r, &mut rng).kappa, 0.7);
    }

    proptest! {
        #[test]
        fn red_only_shift_is_monotone(
            kappa in 0.01f64..2.0,
            alpha in 0.1f64..1.0,
            bursts in proptest::collection::vec((0.0f64..10.0, 0.0f64..20.0), 1..20),
        ) {
            let mut rng = seeded_rng(7);
            let mut s = fresh(kappa, alpha);
            for (p, dt) in bursts {
                let prev = s.current_shift;
                s = apply_burst(&s, p, dt, &mut rng).0;
                prop_assert!(s.current_shift <= prev);
            }
        }

        #[test]
        fn power_switch_is_continuous(
            kappa in 0.01f64..2.0,
            alpha in 0.1f64..1.0,
            p1 in 0.1f64..10.0,
            p2 in 0.1f64..10.0,
            t in 0.1f64..100.0,
        ) {
            let mut rng = seeded_rng(8);
            let s = apply_burst(&fresh(kappa, alpha), p1, t, &mut rng).0;
            // the equivalent time at the new power reproduces the current shift
            let te = equivalent_time(s.current_shift.abs(), kappa, alpha, p2);
            prop_assert!((kappa * p2 * te.powf(alpha) - s.current_shift.abs()).abs() < 1e-9 * s.current_shift.abs());
            // and shrinking bursts at the new power shrink the step
            let d1 = predict_shift(&s, p2, 1e-3).abs();
            let d2 = predict_shift(&s, p2, 1e-6).abs();
            prop_assert!(d2 < d1 || d1 == 0.0);
        }
    }
}
