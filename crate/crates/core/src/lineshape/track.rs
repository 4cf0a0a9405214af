use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fit::PeakFit;
use crate::emitter::EmitterId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tracked,
    Lost,
    Jumped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    pub last: PeakFit,
    pub status: TrackStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    pub entries: BTreeMap<EmitterId, TrackEntry>,
}

impl TrackState {
    pub fn insert(&mut self, id: EmitterId, fit: PeakFit) {
        self.entries.insert(id, TrackEntry { last: fit, status: TrackStatus::Tracked });
    }

    pub fn get(&self, id: &EmitterId) -> Option<&TrackEntry> {
        self.entries.get(id)
    }
}

/// Greedy nearest-neighbour assignment of new fits to known ids.
///
/// Pairs are taken in order of increasing |Δcenter|, then larger amplitude.
/// Within `gate` the id stays tracked, within 10·gate it is marked jumped,
/// and ids left without a fit are lost (their last fit is kept).
pub fn track_peaks(track: &TrackState, fits: &[PeakFit], gate: f64) -> TrackState {
    assert!(gate > 0.0, "gate must be positive");
    let mut pairs: Vec<(f64, f64, usize, usize, &EmitterId)> = Vec::new();
    for (k, (id, entry)) in track.entries.iter().enumerate() {
        for (j, f) in fits.iter().enumerate() {
            let d = (f.center - entry.last.center).abs();
            if d <= 10.0 * gate {
                pairs.push((d, f.amplitude, k, j, id));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let mut out = track.clone();
    let mut id_done = vec![false; track.entries.len()];
    let mut fit_done = vec![false; fits.len()];
    for (d, _, k, j, id) in pairs {
        if id_done[k] || fit_done[j] {
            continue;
        }
        id_done[k] = true;
        fit_done[j] = true;
        let status = if d <= gate { TrackStatus::Tracked } else { TrackStatus::Jumped };
        out.entries.insert(id.clone(), TrackEntry { last: fits[j], status });
    }
    for (k, entry) in out.entries.values_mut().enumerate() {
        if !id_done[k] {
            entry.status = TrackStatus::Lost;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(center: f64, amplitude: f64) -> PeakFit {
        PeakFit {
            center,
            fwhm: 50.0,
            amplitude,
            background: 0.0,
            center_stderr: 0.1,
            converged: true,
            residual_norm: 0.0,
        }
    }

    fn one(center: f64) -> TrackState {
        let mut t = TrackState::default();
        t.insert(EmitterId::new("a"), fit(center, 1.0));
        t
    }

    #[test]
    fn gate_bands() {
        let id = EmitterId::new("a");
        assert_eq!(track_peaks(&one(0.0), &[fit(0.1, 1.0)], 1.0).get(&id).unwrap().status, TrackStatus::Tracked);
        assert_eq!(track_peaks(&one(0.0), &[], 1.0).get(&id).unwrap().status, TrackStatus::Lost);
        assert_eq!(track_peaks(&one(0.0), &[fit(3.0, 1.0)], 1.0).get(&id).unwrap().status, TrackStatus::Jumped);
        assert_eq!(track_peaks(&one(0.0), &[fit(30.0, 1.0)], 1.0).get(&id).unwrap().status, TrackStatus::Lost);
    }

    #[test]
    fn one_fit_per_id_and_tie_break() {
        let mut t = one(0.0);
        t.insert(EmitterId::new("b"), fit(0.5, 1.0));
        let fits = [fit(0.2, 1.0), fit(-0.2, 5.0), fit(0.45, 1.0)];
        let out = track_peaks(&t, &fits, 1.0);
        // equal distance for a: the brighter fit wins
        assert_eq!(out.get(&EmitterId::new("a")).unwrap().last.center, -0.2);
        assert_eq!(out.get(&EmitterId::new("b")).unwrap().last.center, 0.45);
        assert_eq!(out, track_peaks(&t, &fits, 1.0));
    }
}
