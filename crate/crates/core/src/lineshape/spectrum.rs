use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::emitter::EmitterState;
use crate::error::{Error, Result};
use crate::stark::lorentzian;
use crate::units::mhz_to_ghz;
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// GHz detuning
    pub start: f64,
    pub stop: f64,
    /// GHz
    pub step: f64,
    /// s per point
    pub dwell: f64,
    /// Relative probe power; scales every emitter's peak rate.
    pub probe_power: f64,
}

impl ScanConfig {
    /// Default 5 MHz step and 10 ms dwell.
    pub fn around(center: f64, half_width: f64) -> Self {
        Self { start: center - half_width, stop: center + half_width, step: 0.005, dwell: 0.01, probe_power: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.start.is_finite()
            && self.stop.is_finite()
            && self.start < self.stop
            && self.step > 0.0
            && self.dwell > 0.0
            && self.probe_power >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid scan configuration {self:?}")))
        }
    }

    /// Warning text when the step under-samples the narrowest expected line.
    pub fn step_warning(&self, min_linewidth_mhz: f64) -> Option<String> {
        let limit = mhz_to_ghz(min_linewidth_mhz) / 5.0;
        (self.step > limit)
            .then(|| format!("scan step {} GHz exceeds Γ/5 = {limit} GHz; lines may be under-sampled", self.step))
    }

    pub fn points(&self) -> usize {
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.points()).map(|i| self.start + i as f64 * self.step).collect()
    }

    /// Simulated time taken by the scan.
    pub fn duration(&self) -> f64 {
        self.points() as f64 * self.dwell
    }
}

/// One excitation spectrum.
///
/// `counts` hold Poisson draws (integral values) or, in noiseless mode, the
/// expected counts themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub counts: Vec<f64>,
    pub dwell: f64,
    pub pump_on: bool,
    /// mW
    pub pump_power: f64,
    /// s on the simulated clock
    pub timestamp: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.counts.iter().map(move |c| c / self.dwell)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.counts.len() {
            return Err(Error::InvalidArgument("freqs and counts differ in length".into()));
        }
        if self.freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("freqs are not strictly increasing".into()));
        }
        if self.counts.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidArgument("negative counts".into()));
        }
        Ok(())
    }
}

/// Detector and sample noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstrumentNoise {
    /// Dark and residual background, counts/s.
    pub dark_rate: f64,
    /// Pump-induced background per mW, counts/s/mW.
    pub pump_background_per_mw: f64,
    /// Per-scan Gaussian jitter of every line center, MHz.
    pub wander_sigma_mhz: f64,
    /// Expected counts instead of Poisson draws, and no wandering.
    pub noiseless: bool,
}

impl Default for InstrumentNoise {
    fn default() -> Self {
        Self { dark_rate: 100.0, pump_background_per_mw: 500.0, wander_sigma_mhz: 5.0, noiseless: false }
    }
}

impl InstrumentNoise {
    pub fn noiseless() -> Self {
        Self { noiseless: true, wander_sigma_mhz: 0.0, ..Self::default() }
    }

    pub fn background(&self, pump_power: f64) -> f64 {
        self.dark_rate + self.pump_background_per_mw * pump_power
    }
}

/// Expected rate Σ L(ν; emitter) + B0 + b·P, Poisson-sampled per point.
///
/// `extra_shift[i]` (GHz) is added to emitter i's ZPL. Dead emitters are
/// dark but still consume their wandering draw, so the random stream does not
/// depend on which emitters are alive.
pub fn synthesize_spectrum(
    emitters: &[EmitterState],
    extra_shift: &[f64],
    scan: &ScanConfig,
    pump_power: f64,
    noise: &InstrumentNoise,
    timestamp: f64,
    rng: &mut SimRng,
) -> Result<Spectrum> {
    scan.validate()?;
    if !(pump_power >= 0.0) {
        return Err(Error::InvalidArgument("pump power must be non-negative".into()));
    }
    if extra_shift.len() != emitters.len() {
        return Err(Error::InvalidArgument("one extra shift per emitter required".into()));
    }
    let sigma = if noise.noiseless { 0.0 } else { mhz_to_ghz(noise.wander_sigma_mhz) };
    let wander = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let centers: Vec<f64> = emitters
        .iter()
        .zip(extra_shift)
        .map(|(e, s)| {
            let jitter = if sigma > 0.0 { wander.sample(rng) } else { 0.0 };
            e.zpl.0 + s + jitter
        })
        .collect();
    let background = noise.background(pump_power);
    let freqs = scan.freqs();
    let mut counts = Vec::with_capacity(freqs.len());
    for &nu in &freqs {
        let mut rate = background;
        for (e, &c) in emitters.iter().zip(&centers) {
            if e.alive {
                rate += lorentzian(nu, c, e.linewidth, e.peak_rate * scan.probe_power, 0.0);
            }
        }
        let mean = rate * scan.dwell;
        let n = if noise.noiseless || mean <= 0.0 {
            mean.max(0.0)
        } else {
            Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng)
        };
        counts.push(n);
    }
    Ok(Spectrum { freqs, counts, dwell: scan.dwell, pump_on: pump_power > 0.0, pump_power, timestamp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use crate::Vec3;
    use approx::assert_relative_eq;

    #[test]
    fn empty_dark_spectrum_is_zero() {
        let noise = InstrumentNoise { dark_rate: 0.0, ..InstrumentNoise::default() };
        let s =
            synthesize_spectrum(&[], &[], &ScanConfig::around(0.0, 1.0), 0.0, &noise, 0.0, &mut seeded_rng(1)).unwrap();
        assert!(s.counts.iter().all(|&c| c == 0.0));
        s.validate().unwrap();
    }

    #[test]
    fn noiseless_single_line_is_exact_lorentzian() {
        let e = EmitterState::new("a", Vec3::zeros(), 0.2);
        let scan = ScanConfig::around(0.0, 1.0);
        let noise = InstrumentNoise::noiseless();
        let s =
            synthesize_spectrum(std::slice::from_ref(&e), &[0.1], &scan, 0.0, &noise, 0.0, &mut seeded_rng(1)).unwrap();
        for (nu, r) in s.freqs.iter().zip(s.rates()) {
            let expect = lorentzian(*nu, 0.3, e.linewidth, e.peak_rate, noise.dark_rate);
            assert_relative_eq!(r, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn pump_background_is_linear() {
        let noise = InstrumentNoise::noiseless();
        let scan = ScanConfig::around(0.0, 0.1);
        let off = synthesize_spectrum(&[], &[], &scan, 0.0, &noise, 0.0, &mut seeded_rng(1)).unwrap();
        let on = synthesize_spectrum(&[], &[], &scan, 6.0, &noise, 0.0, &mut seeded_rng(1)).unwrap();
        let rise = on.rates().next().unwrap() - off.rates().next().unwrap();
        assert_relative_eq!(rise, 3000.0, epsilon = 1e-9);
        assert!(on.pump_on && !off.pump_on);
    }

    #[test]
    fn poisson_mean_within_three_sigma() {
        let noise = InstrumentNoise { dark_rate: 2000.0, ..InstrumentNoise::default() };
        let mut scan = ScanConfig::around(0.0, 5.0);
        scan.step = 0.001;
        let s = synthesize_spectrum(&[], &[], &scan, 0.0, &noise, 0.0, &mut seeded_rng(11)).unwrap();
        assert!(s.len() >= 10_000);
        let mean = s.counts.iter().sum::<f64>() / s.len() as f64;
        let expect = 2000.0 * scan.dwell;
        let sigma = (expect / s.len() as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * sigma, "mean {mean} vs {expect}");
    }

    #[test]
    fn scan_validation_and_warning() {
        let mut s = ScanConfig::around(0.0, 1.0);
        assert!(s.step_warning(40.0).is_none());
        s.step = 0.02;
        assert!(s.step_warning(40.0).is_some());
        s.stop = s.start;
        assert!(s.validate().is_err());
    }
}
