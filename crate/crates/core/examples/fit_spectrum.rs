//! Synthesizes a noisy excitation spectrum of two lines, finds them and fits
//! each with a Lorentzian. Writes the spectrum as CSV to stdout.

use zpltune::lineshape::{detect_peaks, fit_lorentzian, synthesize_spectrum, FitOptions, InstrumentNoise, ScanConfig};
use zpltune::{seeded_rng, EmitterState, Vec3};

fn main() -> zpltune::Result<()> {
    let mut rng = seeded_rng(3);
    let emitters = [EmitterState::new("a", Vec3::zeros(), -0.4), EmitterState::new("b", Vec3::zeros(), 0.7)];
    let scan = ScanConfig::around(0.0, 1.5);
    let spectrum = synthesize_spectrum(&emitters, &[0.0, 0.0], &scan, 0.0, &InstrumentNoise::default(), 0.0, &mut rng)?;

    let floor = InstrumentNoise::default().dark_rate * scan.dwell;
    for c in detect_peaks(&spectrum, 6.0 * floor.sqrt() + 3.0) {
        let fit = fit_lorentzian(&spectrum, &c, &FitOptions::default())?;
        eprintln!("line at {:+.4} GHz ± {:.2} MHz, FWHM {:.1} MHz", fit.center, fit.center_stderr, fit.fwhm);
    }
    zpltune::lineshape::io::write_csv(&spectrum, std::io::stdout().lock())
}
