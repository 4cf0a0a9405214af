//! Four-parameter Lorentzian least squares (Levenberg–Marquardt).

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::peaks::PeakCandidate;
use super::spectrum::Spectrum;
use crate::error::{Error, Result};
use crate::units::{ghz_to_mhz, mhz_to_ghz};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    /// GHz
    pub center: f64,
    /// MHz
    pub fwhm: f64,
    /// counts/s
    pub amplitude: f64,
    /// counts/s
    pub background: f64,
    /// MHz
    pub center_stderr: f64,
    pub converged: bool,
    /// RMS residual relative to the peak amplitude.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Starting linewidth, MHz.
    pub gamma_guess_mhz: f64,
    /// Half-width of the fit window in units of the starting linewidth.
    pub window_gammas: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { gamma_guess_mhz: 50.0, window_gammas: 10.0, max_iterations: 200 }
    }
}

const MIN_POINTS: usize = 8;

// p = [center GHz, half-width GHz, amplitude, background]
fn model(x: f64, p: &Vector4<f64>) -> (f64, Vector4<f64>) {
    let d = x - p[0];
    let h2 = p[1] * p[1];
    let den = d * d + h2;
    let shape = h2 / den;
    let grad = Vector4::new(p[2] * 2.0 * d * h2 / (den * den), p[2] * 2.0 * p[1] * d * d / (den * den), shape, 1.0);
    (p[2] * shape + p[3], grad)
}

fn cost(x: &[f64], y: &[f64], p: &Vector4<f64>) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (yi - model(xi, p).0).powi(2)).sum()
}

/// Fits A(Γ/2)²/((ν−ν0)²+(Γ/2)²) + B to the rates in a window of
/// ±`window_gammas`·Γ around the candidate. Unweighted residuals.
pub fn fit_lorentzian(spectrum: &Spectrum, init: &PeakCandidate, opts: &FitOptions) -> Result<PeakFit> {
    let half_window = opts.window_gammas * mhz_to_ghz(opts.gamma_guess_mhz);
    let (x, y): (Vec<f64>, Vec<f64>) = spectrum
        .freqs
        .iter()
        .zip(spectrum.rates())
        .filter(|(f, _)| (**f - init.center).abs() <= half_window)
        .map(|(f, r)| (*f, r))
        .unzip();
    if x.len() < MIN_POINTS {
        return Err(Error::DegenerateWindow(format!("{} points in window, need {MIN_POINTS}", x.len())));
    }
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    if !(ymax > ymin) {
        return Err(Error::DegenerateWindow("flat window".into()));
    }
    let x_lo = x[0];
    let x_hi = x[x.len() - 1];

    let mut p = Vector4::new(init.center, 0.5 * mhz_to_ghz(opts.gamma_guess_mhz), ymax - ymin, ymin);
    let mut c = cost(&x, &y, &p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut jtj = Matrix4::zeros();
    for _ in 0..opts.max_iterations {
        jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&xi, &yi) in x.iter().zip(&y) {
            let (m, g) = model(xi, &p);
            jtj += g * g.transpose();
            jtr += g * (yi - m);
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p + step;
            trial[1] = trial[1].abs();
            let ct = cost(&x, &y, &trial);
            if ct <= c {
                let rel_step = (0..4).map(|k| step[k].abs() / (p[k].abs() + 1e-12)).fold(0.0, f64::max);
                let rel_cost = (c - ct) / c.max(1e-300);
                p = trial;
                c = ct;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel_step < 1e-10 || rel_cost < 1e-15 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !improved {
            // no downhill step left: at a minimum to machine precision
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: opts.max_iterations });
    }
    if !(p[0] >= x_lo && p[0] <= x_hi) || p[1] <= 0.0 {
        return Err(Error::DegenerateWindow(format!("fitted center {} left the window", p[0])));
    }
    let dof = (x.len() - 4) as f64;
    let sigma2 = c / dof;
    let center_var = jtj.try_inverse().map_or(f64::INFINITY, |inv| inv[(0, 0)] * sigma2);
    Ok(PeakFit {
        center: p[0],
        fwhm: ghz_to_mhz(2.0 * p[1]),
        amplitude: p[2],
        background: p[3],
        center_stderr: ghz_to_mhz(center_var.max(0.0).sqrt()),
        converged,
        residual_norm: (c / x.len() as f64).sqrt() / p[2].abs().max(1e-300),
    })
}
