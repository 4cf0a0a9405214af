use serde::{Deserialize, Serialize};

use super::estimate::EmitterEstimate;
use crate::emitter::EmitterState;
use crate::error::{Error, Result};
use crate::stark::{Detuning, StarkResponse};
use crate::units::mhz_to_ghz;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TunePlan {
    /// Common target; chosen from the emitters when absent.
    pub target: Option<Detuning>,
    /// MHz
    pub tolerance: f64,
    /// Fraction of the remaining gap aimed for per burst.
    pub safety: f64,
    /// Fraction used while the estimate still rests on priors.
    pub warmup_safety: f64,
    /// mW
    pub p_min: f64,
    pub p_max: f64,
    /// s
    pub dt_min: f64,
    pub dt_max: f64,
    pub max_bursts: usize,
    /// Largest burst dose as a multiple of the dose already delivered.
    pub dose_growth: f64,
    /// GHz below the lowest line when picking a red-only target.
    pub margin: f64,
}

impl Default for TunePlan {
    fn default() -> Self {
        Self {
            target: None,
            tolerance: 120.0,
            safety: 0.5,
            warmup_safety: 0.2,
            p_min: 0.05,
            p_max: 8.0,
            dt_min: 0.1,
            dt_max: 60.0,
            max_bursts: 30,
            dose_growth: 1.0,
            margin: 1.0,
        }
    }
}

impl TunePlan {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tolerance > 0.0
            && self.safety > 0.0
            && self.safety < 1.0
            && self.warmup_safety > 0.0
            && self.warmup_safety < 1.0
            && self.p_min > 0.0
            && self.p_min <= self.p_max
            && self.dt_min > 0.0
            && self.dt_min <= self.dt_max
            && self.dose_growth > 0.0
            && self.margin >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("inconsistent tune plan: {self:?}")))
        }
    }

    pub fn tolerance_ghz(&self) -> f64 {
        mhz_to_ghz(self.tolerance)
    }
}

/// Red-only hosts can only move down, so the target sits below the lowest
/// line; linear hosts take the median.
pub fn choose_target(emitters: &[EmitterState], response: &StarkResponse, plan: &TunePlan) -> Result<Detuning> {
    let mut nu: Vec<f64> = emitters.iter().filter(|e| e.alive).map(|e| e.zpl.0).collect();
    if nu.is_empty() {
        return Err(Error::NoLiveEmitters);
    }
    nu.sort_by(f64::total_cmp);
    if response.is_red_only() {
        return Ok(Detuning(nu[0] - plan.margin));
    }
    let n = nu.len();
    let median = if n % 2 == 1 { nu[n / 2] } else { 0.5 * (nu[n / 2 - 1] + nu[n / 2]) };
    Ok(Detuning(median))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstPlan {
    /// mW
    pub power: f64,
    /// s
    pub duration: f64,
    /// Line position expected after the burst.
    pub predicted: Detuning,
}

/// Plans a burst predicted to cover `safety` of the remaining gap, at the
/// previous burst's power (or `p_max`) unless that would need less than
/// `dt_min`.
pub fn plan_burst(est: &EmitterEstimate, current: Detuning, target: Detuning, plan: &TunePlan) -> Result<BurstPlan> {
    let gap = target.0 - current.0;
    if gap.abs() <= plan.tolerance_ghz() {
        return Err(Error::InvalidArgument("already within tolerance".into()));
    }
    let est = &est.for_planning();
    if !(est.kappa_hat > 0.0) {
        return Err(Error::InvalidArgument("non-positive kappa estimate".into()));
    }
    let direction = gap.signum();
    if est.sign_hat != 0.0 && est.sign_hat != direction {
        return Err(Error::InvalidArgument("emitter shifts away from the target".into()));
    }
    let safety = if est.confidence < 3 { plan.safety.min(plan.warmup_safety) } else { plan.safety };
    let want = safety * gap.abs();

    // Power never goes back up, and a burst too short for `dt_min` keeps its
    // dose at lower power. Predictions are made for that dose at the current
    // power: under a sub-linear law the weaker burst falls short of them.
    // The exception is a burst that would not fit in `dt_max`: power then
    // doubles, and the prediction is the larger of the two readings.
    let mut p_cur = est.history.last().map_or(plan.p_max, |h| h.power.clamp(plan.p_min, plan.p_max));
    let mut dt = est.duration_for(p_cur, want);
    let raised = !(dt <= plan.dt_max) && p_cur < plan.p_max;
    if raised {
        p_cur = (2.0 * p_cur).min(plan.p_max);
        dt = est.duration_for(p_cur, want);
    }
    let dt = dt.min(plan.dt_max);
    let (power, duration) =
        if dt >= plan.dt_min { (p_cur, dt) } else { ((p_cur * dt / plan.dt_min).max(plan.p_min), plan.dt_min) };
    let (power, duration) = cap_dose(est.dose(), power, duration, plan);
    let mut delta = est.predict(p_cur, power * duration / p_cur);
    if raised {
        let last = est.history.last().map_or(p_cur, |h| h.power);
        delta = delta.max(est.predict(last, power * duration / last));
    }
    if delta > gap.abs() {
        return Err(Error::GapTooSmallForDose { predicted_ghz: delta, gap_ghz: gap.abs() });
    }
    Ok(BurstPlan { power, duration, predicted: Detuning(current.0 + direction * delta) })
}

/// Keeps a burst within `dose_growth` times the dose already delivered, so
/// the fitted law is never extrapolated far past the exposures behind it.
/// Matters when the true response is steeper than the model early on.
fn cap_dose(delivered: f64, power: f64, duration: f64, plan: &TunePlan) -> (f64, f64) {
    let cap = plan.dose_growth * delivered;
    if delivered <= 0.0 || power * duration <= cap {
        (power, duration)
    } else if cap / power >= plan.dt_min {
        (power, cap / power)
    } else {
        ((cap / plan.dt_min).max(plan.p_min), plan.dt_min)
    }
}
