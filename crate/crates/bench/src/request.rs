//! Operator commands. Each one is logged verbatim so that replay can
//! re-execute it.

use serde::{Deserialize, Serialize};
use zpltune::tuner::TunePlan;

/// Where a confocal beam is pointed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Aim {
    /// Lateral position of a known emitter.
    Emitter(String),
    /// Lateral position, µm.
    Position([f64; 2]),
}

/// Pump beam left on while a scan runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    pub aim: Aim,
    /// mW
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRequest {
    /// GHz
    pub start: f64,
    pub stop: f64,
    /// Instrument default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell: Option<f64>,
    #[serde(default = "unit")]
    pub probe_power: f64,
    /// Confocal detection spot; wide-field collection when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aim: Option<Aim>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<PumpSpec>,
}

fn unit() -> f64 {
    1.0
}

impl ScanRequest {
    pub fn window(start: f64, stop: f64) -> Self {
        Self { start, stop, step_mhz: None, dwell: None, probe_power: 1.0, aim: None, pump: None }
    }

    pub fn aimed(mut self, aim: Aim) -> Self {
        self.aim = Some(aim);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstRequest {
    pub aim: Aim,
    /// mW
    pub power: f64,
    /// s
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaitRequest {
    /// s
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapRequest {
    /// Probe detuning, GHz.
    pub probe: f64,
    /// Field of view, µm.
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub step_um: f64,
    /// Exposure per pixel, s.
    #[serde(default = "default_map_dwell")]
    pub dwell: f64,
    #[serde(default = "unit")]
    pub probe_power: f64,
}

fn default_map_dwell() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AutotuneRequest {
    pub plan: TunePlan,
    /// Emitters to synchronize; all when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<String>>,
    /// Window searched for untracked emitters, GHz. Defaults to the
    /// configured detunings ± 5 GHz.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survey: Option<[f64; 2]>,
}

/// Anything that mutates a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Scan(ScanRequest),
    Burst(BurstRequest),
    Wait(WaitRequest),
    Map(MapRequest),
    Autotune(AutotuneRequest),
}
