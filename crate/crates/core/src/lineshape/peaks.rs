use serde::{Deserialize, Serialize};

use super::spectrum::Spectrum;

/// Points in the moving-average smoothing window.
pub const SMOOTHING_WINDOW: usize = 5;

/// Rough peak position handed to the Lorentzian fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakCandidate {
    /// GHz
    pub center: f64,
    /// Smoothed counts at the maximum.
    pub height: f64,
    pub prominence: f64,
}

fn smooth(y: &[f64]) -> Vec<f64> {
    let half = SMOOTHING_WINDOW / 2;
    (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Local maxima of the smoothed counts whose topographic prominence reaches
/// `min_prominence`, tallest first.
pub fn detect_peaks(spectrum: &Spectrum, min_prominence: f64) -> Vec<PeakCandidate> {
    let y = smooth(&spectrum.counts);
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        // plateau [i, j)
        let mut j = i + 1;
        while j < n && y[j] == y[i] {
            j += 1;
        }
        let left_lower = i == 0 || y[i - 1] < y[i];
        let right_lower = j == n || y[j] < y[i];
        let is_edge_plateau = i == 0 && j == n;
        if left_lower && right_lower && !is_edge_plateau {
            let h = y[i];
            let mut left_min = h;
            for k in (0..i).rev() {
                if y[k] > h {
                    break;
                }
                left_min = left_min.min(y[k]);
            }
            let mut right_min = h;
            for &v in &y[j..] {
                if v > h {
                    break;
                }
                right_min = right_min.min(v);
            }
            let prominence = h - left_min.max(right_min);
            if prominence >= min_prominence && prominence > 0.0 {
                let mid = (i + j - 1) / 2;
                out.push(PeakCandidate { center: spectrum.freqs[mid], height: h, prominence });
            }
        }
        i = j;
    }
    out.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.center.total_cmp(&b.center)));
    out
}
