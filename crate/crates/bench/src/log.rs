//! Append-only session log, one JSON object per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use zpltune::kinetics::BurstOutcome;
use zpltune::lineshape::{PeakFit, ScanConfig, Spectrum, TrackStatus};
use zpltune::tuner::{EmitterEstimate, TuneReport};
use zpltune::Detuning;

use crate::error::ReplayError;
use crate::request::{AutotuneRequest, BurstRequest, Command, MapRequest, ScanRequest, WaitRequest};
use crate::session::SessionState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    /// Words drawn from the session stream before this record was written.
    pub draws: u64,
    /// Simulated seconds since the session started.
    pub clock: f64,
    pub record: Record,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Snapshot(SnapshotRecord),
    Scan(ScanRecord),
    Fit(FitRecord),
    Track(TrackRecord),
    Burst(BurstRecord),
    Wait(WaitRequest),
    Map(MapRecord),
    Autotune(AutotuneRequest),
    Target(TargetRecord),
    Estimate(EstimateRecord),
    Outcome(OutcomeRecord),
}

impl Record {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Snapshot(_) => "snapshot",
            Self::Scan(_) => "scan",
            Self::Fit(_) => "fit",
            Self::Track(_) => "track",
            Self::Burst(_) => "burst",
            Self::Wait(_) => "wait",
            Self::Map(_) => "map",
            Self::Autotune(_) => "autotune",
            Self::Target(_) => "target",
            Self::Estimate(_) => "estimate",
            Self::Outcome(_) => "outcome",
        }
    }

    /// The command that produced this record, if it opens one.
    pub fn command(&self) -> Option<Command> {
        match self {
            Self::Scan(r) => Some(Command::Scan(r.request.clone())),
            Self::Burst(r) => Some(Command::Burst(r.request.clone())),
            Self::Wait(r) => Some(Command::Wait(*r)),
            Self::Map(r) => Some(Command::Map(r.request)),
            Self::Autotune(r) => Some(Command::Autotune(r.clone())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub config_hash: String,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub request: ScanRequest,
    /// Resolved scan axis.
    pub scan: ScanConfig,
    pub pump_power: f64,
    pub counts: Vec<f64>,
    /// Line motion caused by a pump left on during the scan.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exposure: Vec<EmitterEffect>,
}

impl ScanRecord {
    pub fn spectrum(&self, timestamp: f64) -> Spectrum {
        Spectrum {
            freqs: self.scan.freqs(),
            counts: self.counts.clone(),
            dwell: self.scan.dwell,
            pump_on: self.pump_power > 0.0,
            pump_power: self.pump_power,
            timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Candidate position handed to the fit, GHz.
    pub candidate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<PeakFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub results: Vec<FitResult>,
}

impl FitRecord {
    pub fn fits(&self) -> impl Iterator<Item = &PeakFit> {
        self.results.iter().filter_map(|r| r.fit.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub id: String,
    pub fit: PeakFit,
    pub status: TrackStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterEffect {
    pub id: String,
    /// Relative pump intensity at the emitter.
    pub intensity: f64,
    /// Line displacement, GHz.
    pub shift: f64,
    pub outcome: BurstOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstRecord {
    pub request: BurstRequest,
    /// Planned post-burst line position, when a controller fired it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Detuning>,
    /// mW·s at the beam center.
    pub dose: f64,
    pub effects: Vec<EmitterEffect>,
    /// Ionization events (microscopic backend).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ionizations: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub request: MapRequest,
    pub width: usize,
    pub height: usize,
    pub counts: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub target: Detuning,
    /// MHz
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub id: String,
    pub estimate: EmitterEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub report: TuneReport,
}

pub fn write_jsonl<W: Write>(entries: &[LogEntry], mut out: W) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<LogEntry>, ReplayError> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line.map_err(|e| ReplayError::Malformed { line: k + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let e =
            serde_json::from_str(&line).map_err(|e| ReplayError::Malformed { line: k + 1, message: e.to_string() })?;
        out.push(e);
    }
    Ok(out)
}

/// Event pushed to stream subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub seq: u64,
    pub kind: String,
    pub clock: f64,
    pub entry: LogEntry,
}

impl From<&LogEntry> for StreamEvent {
    fn from(e: &LogEntry) -> Self {
        Self { seq: e.seq, kind: e.record.kind().into(), clock: e.clock, entry: e.clone() }
    }
}
