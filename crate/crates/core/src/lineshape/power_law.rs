//! ν(t) = ν0 + β (t/t0)^α with t0 = 1 s.
//!
//! For fixed α the model is linear in (ν0, β), so the fit profiles those out
//! in closed form and searches α on (0, 1.5]. The search is seeded by a
//! log–log regression of |ν(t) − ν(t₁)| and refined by golden section.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ALPHA_MAX: f64 = 1.5;
const ALPHA_MIN: f64 = 1e-3;
const GRID: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// GHz
    pub nu0: f64,
    /// GHz
    pub beta: f64,
    pub alpha: f64,
    /// Sum of squared residuals, GHz².
    pub sse: f64,
}

impl PowerLawFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.nu0 + self.beta * t.powf(self.alpha)
    }
}

fn profile(times: &[f64], centers: &[f64], alpha: f64) -> (f64, f64, f64) {
    let n = times.len() as f64;
    let u: Vec<f64> = times.iter().map(|t| t.powf(alpha)).collect();
    let su: f64 = u.iter().sum();
    let sy: f64 = centers.iter().sum();
    let suu: f64 = u.iter().map(|v| v * v).sum();
    let suy: f64 = u.iter().zip(centers).map(|(a, b)| a * b).sum();
    let det = n * suu - su * su;
    if det.abs() <= 1e-300 {
        return (sy / n, 0.0, f64::INFINITY);
    }
    let beta = (n * suy - su * sy) / det;
    let nu0 = (sy - beta * su) / n;
    let sse = u.iter().zip(centers).map(|(ui, yi)| (yi - nu0 - beta * ui).powi(2)).sum();
    (nu0, beta, sse)
}

fn loglog_seed(times: &[f64], centers: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times[1..]
        .iter()
        .zip(&centers[1..])
        .map(|(t, c)| (t.ln(), (c - centers[0]).abs()))
        .filter(|(_, d)| *d > 0.0)
        .map(|(lt, d)| (lt, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| (sxy / sxx).clamp(ALPHA_MIN, ALPHA_MAX))
}

pub fn fit_power_law(times: &[f64], centers: &[f64]) -> Result<PowerLawFit> {
    if times.len() != centers.len() {
        return Err(Error::InvalidArgument("times and centers differ in length".into()));
    }
    if times.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: times.len() });
    }
    if times.iter().any(|t| !(*t > 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("times must be positive and increasing".into()));
    }
    let sse = |a: f64| profile(times, centers, a).2;

    let mut best_a = ALPHA_MAX;
    let mut best = sse(best_a);
    let grid = (1..=GRID).map(|k| ALPHA_MAX * k as f64 / GRID as f64);
    for a in grid.chain(loglog_seed(times, centers)) {
        let v = sse(a);
        if v < best {
            best = v;
            best_a = a;
        }
    }
    let h = ALPHA_MAX / GRID as f64;
    let (mut lo, mut hi) = ((best_a - h).max(ALPHA_MIN), (best_a + h).min(ALPHA_MAX));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (sse(c), sse(d));
    while hi - lo > 1e-13 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = sse(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = sse(d);
        }
    }
    let mut alpha = 0.5 * (lo + hi);
    if sse(best_a) < sse(alpha) {
        alpha = best_a;
    }
    let (nu0, beta, sse) = profile(times, centers, alpha);
    Ok(PowerLawFit { nu0, beta, alpha, sse })
}

/// As [`fit_power_law`], rejecting traces that move blue of their first
/// sample, which a red-only host cannot produce.
pub fn fit_power_law_red_only(times: &[f64], centers: &[f64]) -> Result<PowerLawFit> {
    if let Some(first) = centers.first() {
        if centers.iter().any(|c| c > first) {
            return Err(Error::NonMonotoneShift);
        }
    }
    fit_power_law(times, centers)
}
