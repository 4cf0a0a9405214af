use serde::{Deserialize, Serialize};

/// Upper end of the admissible α range.
pub const ALPHA_MAX: f64 = 1.5;
const ALPHA_GRID: usize = 150;
const MIN_POINTS: usize = 3;
/// Cumulative shifts below this are indistinguishable from fit noise.
pub const RESOLVED_SHIFT_GHZ: f64 = 0.03;
/// Steepest local exponent the planner will extrapolate with.
const LOCAL_ALPHA_MAX: f64 = 3.0;

/// One burst as seen by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    /// mW
    pub power: f64,
    /// s
    pub duration: f64,
    /// Cumulative dose after this burst, mW·s.
    pub dose: f64,
    /// Jump-corrected cumulative shift after this burst, GHz (signed).
    pub shift: f64,
    pub jump: bool,
}

/// Running power-law estimate for one emitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterEstimate {
    pub alpha_hat: f64,
    pub kappa_hat: f64,
    /// Shift direction, ±1, or 0 while unknown.
    pub sign_hat: f64,
    pub history: Vec<HistoryPoint>,
    /// Number of observations used by the current fit.
    pub confidence: usize,
    /// Power-law part of the shift accumulated so far, GHz (signed).
    pub cumulative_shift: f64,
    pub alpha_prior: f64,
    pub kappa_prior: f64,
}

impl EmitterEstimate {
    /// `sign` is −1 for red-only hosts and 0 when the direction is unknown.
    pub fn new(alpha_prior: f64, kappa_prior: f64, sign: f64) -> Self {
        Self {
            alpha_hat: alpha_prior,
            kappa_hat: kappa_prior,
            sign_hat: sign,
            history: Vec::new(),
            confidence: 0,
            cumulative_shift: 0.0,
            alpha_prior,
            kappa_prior,
        }
    }

    /// The estimate a burst should be planned with.
    ///
    /// If the last two clean observations grew faster than the fitted curve
    /// allows, the power law through those two points is used instead, so a
    /// response that is still accelerating is not extrapolated too gently.
    /// After a single observation the steepest admissible curve is used.
    pub fn for_planning(&self) -> EmitterEstimate {
        let usable = usable_points(self);
        if usable.is_empty() && !self.history.is_empty() && self.alpha_hat > 0.0 {
            // Dosed but nothing resolved yet: the response is at most the floor.
            let f = unit_trajectory(&self.history, self.alpha_hat);
            let mut local = self.clone();
            local.kappa_hat = self.kappa_hat.min(RESOLVED_SHIFT_GHZ / f[f.len() - 1]);
            local.cumulative_shift = self.sign_hat * RESOLVED_SHIFT_GHZ.min(local.kappa_hat * f[f.len() - 1]);
            return local;
        }
        if let [k] = usable[..] {
            // One point fixes κ but not the curvature; assume the steepest.
            if self.alpha_hat >= LOCAL_ALPHA_MAX {
                return self.clone();
            }
            let f = unit_trajectory(&self.history[..=k], LOCAL_ALPHA_MAX);
            let mut local = self.clone();
            local.alpha_hat = LOCAL_ALPHA_MAX;
            local.kappa_hat = self.history[k].shift * self.sign_hat / f[k];
            return local;
        }
        let [.., k1, k2] = usable[..] else { return self.clone() };
        let sign = self.sign_hat;
        let (s1, s2) = (self.history[k1].shift * sign, self.history[k2].shift * sign);
        let ratio = |a: f64| {
            let f = unit_trajectory(&self.history[..=k2], a);
            (f[k2] / f[k1]).ln()
        };
        let want = (s2 / s1).ln();
        if !(want > ratio(self.alpha_hat)) {
            return self.clone();
        }
        let alpha = if want >= ratio(LOCAL_ALPHA_MAX) {
            LOCAL_ALPHA_MAX
        } else {
            let (mut lo, mut hi) = (self.alpha_hat, LOCAL_ALPHA_MAX);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if ratio(mid) < want {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let f = unit_trajectory(&self.history[..=k2], alpha);
        let mut local = self.clone();
        local.alpha_hat = alpha;
        local.kappa_hat = s2 / f[k2];
        local
    }

    pub fn dose(&self) -> f64 {
        self.history.last().map_or(0.0, |h| h.dose)
    }

    /// Predicted magnitude of the extra shift from a burst.
    pub fn predict(&self, power: f64, duration: f64) -> f64 {
        if power <= 0.0 || duration <= 0.0 || self.kappa_hat <= 0.0 {
            return 0.0;
        }
        let s = self.cumulative_shift.abs() / self.kappa_hat;
        self.kappa_hat * (advance_unit(s, power, duration, self.alpha_hat) - s)
    }

    /// Burst duration at `power` that is predicted to add `shift` GHz.
    pub fn duration_for(&self, power: f64, shift: f64) -> f64 {
        let (k, a) = (self.kappa_hat, self.alpha_hat);
        let s = self.cumulative_shift.abs();
        if s == 0.0 {
            return (shift / (k * power)).powf(1.0 / a);
        }
        let t_prev = ((s.ln() - (k * power).ln()) / a).exp();
        t_prev * ((shift / s).ln_1p() / a).exp_m1()
    }
}

/// Shift magnitude after a burst for κ = 1, by the equivalent-time rule.
///
/// Written as s·(1 + dt/t')^α so that long histories at low power do not
/// overflow the equivalent time.
fn advance_unit(s: f64, power: f64, duration: f64, alpha: f64) -> f64 {
    if s == 0.0 {
        return power * duration.powf(alpha);
    }
    let log_t = (s.ln() - power.ln()) / alpha;
    s * (alpha * (duration * (-log_t).exp()).ln_1p()).exp()
}

/// Model trajectory for κ = 1 at every history point.
fn unit_trajectory(history: &[HistoryPoint], alpha: f64) -> Vec<f64> {
    let mut s = 0.0;
    history
        .iter()
        .map(|h| {
            s = advance_unit(s, h.power, h.duration, alpha);
            s
        })
        .collect()
}

/// Profile fit: for fixed α the log-shift is log κ + log f(α), so κ follows
/// from a mean and α from a 1-D search.
fn profile(history: &[HistoryPoint], usable: &[usize], sign: f64, alpha: f64) -> (f64, f64) {
    let f = unit_trajectory(history, alpha);
    let r: Vec<f64> = usable.iter().map(|&k| (history[k].shift * sign).ln() - f[k].ln()).collect();
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let sse: f64 = r.iter().map(|x| (x - mean).powi(2)).sum();
    if sse.is_finite() && mean.is_finite() {
        (sse, mean.exp())
    } else {
        (f64::INFINITY, 0.0)
    }
}

fn usable_points(est: &EmitterEstimate) -> Vec<usize> {
    (0..est.history.len())
        .filter(|&k| !est.history[k].jump && est.history[k].shift * est.sign_hat > RESOLVED_SHIFT_GHZ)
        .collect()
}

fn refit(est: &mut EmitterEstimate) {
    let sign = est.sign_hat;
    let usable = usable_points(est);
    est.confidence = usable.len();
    if usable.len() < MIN_POINTS {
        // Too little data for α; rescale κ at the prior α once anything moved.
        est.alpha_hat = est.alpha_prior;
        est.kappa_hat =
            if usable.is_empty() { est.kappa_prior } else { profile(&est.history, &usable, sign, est.alpha_prior).1 };
        return;
    }
    let step = ALPHA_MAX / ALPHA_GRID as f64;
    let sse = |a: f64| profile(&est.history, &usable, sign, a).0;
    let best = (1..=ALPHA_GRID)
        .map(|i| (i, sse(i as f64 * step)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(ALPHA_GRID / 2, |b| b.0);
    let lo = (best as f64 - 1.0).max(1e-3) * step;
    let hi = ((best + 1).min(ALPHA_GRID)) as f64 * step;
    let alpha = golden_min(sse, lo, hi, 1e-12);
    let (_, kappa) = profile(&est.history, &usable, sign, alpha);
    est.alpha_hat = alpha;
    est.kappa_hat = kappa;
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Folds one burst and its observed line displacement into the estimate.
///
/// `observed` is the change of the fitted center across the burst. A
/// jump-flagged observation is not fitted; the model's predicted shift is
/// booked for that burst instead, so later observations are measured from a
/// baseline that excludes the jump.
pub fn update_estimate(est: &EmitterEstimate, observed: f64, power: f64, duration: f64, jump: bool) -> EmitterEstimate {
    let mut next = est.clone();
    if jump {
        let sign = if est.sign_hat != 0.0 { est.sign_hat } else { 0.0 };
        next.cumulative_shift += sign * est.predict(power, duration);
    } else if observed.is_finite() {
        next.cumulative_shift += observed;
    }
    if next.sign_hat == 0.0 && next.cumulative_shift.abs() > RESOLVED_SHIFT_GHZ {
        next.sign_hat = next.cumulative_shift.signum();
    }
    next.history.push(HistoryPoint {
        power,
        duration,
        dose: est.dose() + power * duration,
        shift: next.cumulative_shift,
        jump,
    });
    refit(&mut next);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{apply_burst, KineticsParams, KineticsState};
    use crate::seeded_rng;
    use approx::assert_relative_eq;

    fn feed(est: EmitterEstimate, bursts: &[(f64, f64)], params: KineticsParams) -> EmitterEstimate {
        let mut rng = seeded_rng(0);
        let mut state = KineticsState::new(params, crate::Detuning(0.0));
        let mut est = est;
        for &(p, dt) in bursts {
            let before = state.frequency().0;
            state = apply_burst(&state, p, dt, &mut rng).0;
            est = update_estimate(&est, state.frequency().0 - before, p, dt, false);
        }
        est
    }

    #[test]
    fn alpha_prior_holds_below_three_points() {
        let est = EmitterEstimate::new(0.55, 0.5, -1.0);
        assert_eq!(update_estimate(&est, 0.0, 2.0, 1.0, false).kappa_hat, 0.5);
        let est = feed(est, &[(2.0, 1.0), (2.0, 1.0)], KineticsParams::without_hazards(1.0, 0.9, -1.0));
        assert_eq!(est.alpha_hat, 0.55);
        assert_eq!(est.history.len(), 2);
        // κ is rescaled so the prior-α curve passes through the data.
        let f1: f64 = 2.0;
        let f2 = 2.0 * 2f64.powf(0.55);
        let expect = ((1.0 * 2.0 / f1).ln() / 2.0 + (1.0 * 2.0 * 2f64.powf(0.9) / f2).ln() / 2.0).exp();
        assert_relative_eq!(est.kappa_hat, expect, max_relative = 1e-12);
    }

    #[test]
    fn noiseless_history_is_recovered() {
        let bursts = [(1.0, 0.5), (4.0, 2.0), (2.0, 1.0), (8.0, 0.3), (0.5, 5.0)];
        let est = feed(EmitterEstimate::new(0.55, 0.2, -1.0), &bursts, KineticsParams::without_hazards(1.0, 0.5, -1.0));
        assert_relative_eq!(est.alpha_hat, 0.5, max_relative = 1e-6);
        assert_relative_eq!(est.kappa_hat, 1.0, max_relative = 1e-6);
        assert_eq!(est.confidence, 5);
    }

    #[test]
    fn sign_is_learned_for_linear_hosts() {
        let est =
            feed(EmitterEstimate::new(0.55, 0.1, 0.0), &[(1.0, 1.0)], KineticsParams::without_hazards(0.1, 0.6, 1.0));
        assert_eq!(est.sign_hat, 1.0);
    }

    #[test]
    fn jump_flagged_point_is_ignored() {
        let bursts = [(1.0, 0.5), (4.0, 2.0), (2.0, 1.0), (8.0, 0.3)];
        let clean =
            feed(EmitterEstimate::new(0.55, 0.2, -1.0), &bursts, KineticsParams::without_hazards(0.7, 0.6, -1.0));
        let flagged = update_estimate(&clean, 3.7, 1.0, 1.0, true);
        assert_eq!(flagged.alpha_hat, clean.alpha_hat);
        assert_eq!(flagged.kappa_hat, clean.kappa_hat);
        assert_eq!(flagged.history.len(), clean.history.len() + 1);
    }

    #[test]
    fn accelerating_response_is_planned_with_its_local_exponent() {
        // Quadratic in dose at fixed power: the fit stops at ALPHA_MAX.
        let mut est = EmitterEstimate::new(0.55, 0.5, -1.0);
        for k in 1..=4 {
            let s = |n: f64| -0.2 * n * n;
            est = update_estimate(&est, s(k as f64) - s(k as f64 - 1.0), 2.0, 1.0, false);
        }
        assert!(est.alpha_hat <= ALPHA_MAX);
        let local = est.for_planning();
        assert_relative_eq!(local.alpha_hat, 2.0, max_relative = 1e-6);
        // Doubling the dose is predicted to quadruple the shift.
        assert_relative_eq!(local.predict(2.0, 4.0), 3.0 * 3.2, max_relative = 1e-6);
    }

    #[test]
    fn single_observation_plans_with_the_steepest_curve() {
        let est = update_estimate(&EmitterEstimate::new(0.55, 0.5, -1.0), -1.0, 2.0, 1.0, false);
        let local = est.for_planning();
        assert_eq!(local.alpha_hat, LOCAL_ALPHA_MAX);
        assert_relative_eq!(local.predict(2.0, 1.0), 7.0, max_relative = 1e-9);
    }

    #[test]
    fn unresolved_shifts_are_not_fitted() {
        let mut est = EmitterEstimate::new(0.55, 0.5, 0.0);
        est = update_estimate(&est, 0.01, 1.0, 1.0, false);
        assert_eq!(est.sign_hat, 0.0);
        assert_eq!(est.confidence, 0);
        let est = EmitterEstimate::new(0.55, 0.5, -1.0);
        let est = update_estimate(&est, -0.01, 1.0, 1.0, false);
        assert_eq!(est.kappa_hat, 0.5);
        // Planning assumes the response sits at the resolution floor.
        let local = est.for_planning();
        assert_relative_eq!(local.cumulative_shift, -RESOLVED_SHIFT_GHZ, max_relative = 1e-12);
        assert!(local.kappa_hat < est.kappa_hat);
    }

    #[test]
    fn duration_inverts_prediction() {
        let mut est = EmitterEstimate::new(0.4, 0.3, -1.0);
        est.cumulative_shift = -7.0;
        let dt = est.duration_for(3.0, 1.25);
        assert_relative_eq!(est.predict(3.0, dt), 1.25, max_relative = 1e-10);
        est.cumulative_shift = 0.0;
        let dt = est.duration_for(3.0, 1.25);
        assert_relative_eq!(est.predict(3.0, dt), 1.25, max_relative = 1e-10);
    }

    #[test]
    fn unit_trajectory_matches_closed_form_at_fixed_power() {
        let h: Vec<HistoryPoint> = (0..4)
            .map(|k| HistoryPoint { power: 2.0, duration: 1.5, dose: 3.0 * (k + 1) as f64, shift: 0.0, jump: false })
            .collect();
        let f = unit_trajectory(&h, 0.7);
        for (k, v) in f.iter().enumerate() {
            assert_relative_eq!(*v, 2.0 * (1.5 * (k + 1) as f64).powf(0.7), max_relative = 1e-12);
        }
    }
}
