//! Session configuration: JSON in, validated structs out.
//!
//! Every problem is reported with a JSON pointer into the submitted
//! document so that clients can highlight the offending field.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use zpltune::charge_mc::{CascadeRates, DonorLayout};
use zpltune::kinetics::KineticsRanges;
use zpltune::lineshape::InstrumentNoise;
use zpltune::HostMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

impl SchemaError {
    fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self { pointer: pointer.into(), message: message.into() }
    }
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{at}: {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub seed: u64,
    pub host: HostMatrix,
    /// Probe (ZPL) wavelength, nm; host default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_wavelength: Option<f64>,
    /// Pump wavelength, nm; host default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_wavelength: Option<f64>,
    pub emitters: EmitterSpec,
    #[serde(default)]
    pub instrument: InstrumentConfig,
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EmitterSpec {
    List(Vec<EmitterEntry>),
    Generate(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterEntry {
    pub id: String,
    /// µm
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
    /// GHz from the reference line.
    pub detuning: f64,
    /// Molecular axis; random for linear hosts, z otherwise, when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    /// MHz
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidth: Option<f64>,
    /// counts/s
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub count: usize,
    /// Side of the square field in which emitters are placed, µm.
    pub extent_um: f64,
    /// Detunings drawn uniformly in [0, spread], GHz.
    pub spread_ghz: f64,
    /// Minimum lateral distance between emitters, µm.
    #[serde(default = "default_separation")]
    pub min_separation_um: f64,
}

fn default_separation() -> f64 {
    3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanDefaults {
    pub step_mhz: f64,
    pub dwell_s: f64,
    pub half_width_ghz: f64,
}

impl Default for ScanDefaults {
    fn default() -> Self {
        Self { step_mhz: 5.0, dwell_s: 0.01, half_width_ghz: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstrumentConfig {
    pub scan: ScanDefaults,
    /// Pump focus 1/e² radius, µm.
    pub beam_waist_um: f64,
    /// Detection point-spread 1/e² radius, µm.
    pub psf_waist_um: f64,
    pub noise: InstrumentNoise,
    /// mW
    pub p_max: f64,
    /// s
    pub dt_max: f64,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        Self {
            scan: ScanDefaults::default(),
            beam_waist_um: 0.5,
            psf_waist_um: 0.5,
            noise: InstrumentNoise::default(),
            p_max: 20.0,
            dt_max: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Kinetics(KineticsBlock),
    Microscopic(MicroBlock),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticsBlock {
    /// Host defaults when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranges: Option<KineticsRanges>,
    /// Bleaching and spectral jumps.
    pub hazards: bool,
}

impl Default for KineticsBlock {
    fn default() -> Self {
        Self { ranges: None, hazards: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicroBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<CascadeRates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<DonorLayout>,
    pub epsilon_r: f64,
}

impl Default for MicroBlock {
    fn default() -> Self {
        Self { rates: None, layout: None, epsilon_r: zpltune::host::EPSILON_R }
    }
}

impl SessionConfig {
    pub fn reference_wavelength(&self) -> f64 {
        self.reference_wavelength.unwrap_or_else(|| self.host.reference_wavelength())
    }

    pub fn pump_wavelength(&self) -> f64 {
        self.pump_wavelength.unwrap_or_else(|| self.host.pump_wavelength())
    }

    pub fn kinetics_ranges(&self) -> KineticsRanges {
        match &self.backend {
            BackendConfig::Kinetics(k) => {
                let r = k.ranges.unwrap_or_else(|| self.host.kinetics_ranges());
                if k.hazards {
                    r
                } else {
                    r.without_hazards()
                }
            }
            BackendConfig::Microscopic(_) => self.host.kinetics_ranges(),
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Semantic checks beyond the JSON shape.
    pub fn validate(&self) -> Result<(), Vec<SchemaError>> {
        let mut errs = Vec::new();
        let mut positive = |ptr: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(SchemaError::new(ptr, format!("must be a positive number, got {v}")));
            }
        };
        if let Some(w) = self.reference_wavelength {
            positive("/reference_wavelength", w);
        }
        if let Some(w) = self.pump_wavelength {
            positive("/pump_wavelength", w);
        }
        let i = &self.instrument;
        positive("/instrument/scan/step_mhz", i.scan.step_mhz);
        positive("/instrument/scan/dwell_s", i.scan.dwell_s);
        positive("/instrument/scan/half_width_ghz", i.scan.half_width_ghz);
        positive("/instrument/beam_waist_um", i.beam_waist_um);
        positive("/instrument/psf_waist_um", i.psf_waist_um);
        positive("/instrument/p_max", i.p_max);
        positive("/instrument/dt_max", i.dt_max);
        if let BackendConfig::Microscopic(m) = &self.backend {
            positive("/backend/microscopic/epsilon_r", m.epsilon_r);
        }
        if i.noise.dark_rate < 0.0 {
            errs.push(SchemaError::new("/instrument/noise/dark_rate", "must be non-negative"));
        }
        match &self.emitters {
            EmitterSpec::List(list) => {
                if list.is_empty() {
                    errs.push(SchemaError::new("/emitters/list", "at least one emitter is required"));
                }
                let mut seen = BTreeSet::new();
                for (k, e) in list.iter().enumerate() {
                    let at = |f: &str| format!("/emitters/list/{k}/{f}");
                    if !seen.insert(e.id.as_str()) {
                        errs.push(SchemaError::new(at("id"), format!("duplicate id {:?}", e.id)));
                    }
                    for (f, v) in [("x", e.x), ("y", e.y), ("z", e.z), ("detuning", e.detuning)] {
                        if !v.is_finite() {
                            errs.push(SchemaError::new(at(f), "must be finite"));
                        }
                    }
                    if let Some(a) = e.axis {
                        let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
                        if !(n > 0.0 && n.is_finite()) {
                            errs.push(SchemaError::new(at("axis"), "must be a non-zero vector"));
                        }
                    }
                    if let Some(w) = e.linewidth {
                        let (lo, hi) = zpltune::emitter::LINEWIDTH_BAND_MHZ;
                        if !(w >= lo && w <= hi) {
                            errs.push(SchemaError::new(at("linewidth"), format!("must lie in [{lo}, {hi}] MHz")));
                        }
                    }
                    if let Some(r) = e.peak_rate {
                        if !(r > 0.0) {
                            errs.push(SchemaError::new(at("peak_rate"), "must be positive"));
                        }
                    }
                }
            }
            EmitterSpec::Generate(g) => {
                if g.count == 0 {
                    errs.push(SchemaError::new("/emitters/generate/count", "must be at least 1"));
                }
                if !(g.extent_um >= 0.0) {
                    errs.push(SchemaError::new("/emitters/generate/extent_um", "must be non-negative"));
                }
                if !(g.spread_ghz >= 0.0) {
                    errs.push(SchemaError::new("/emitters/generate/spread_ghz", "must be non-negative"));
                }
                if !(g.min_separation_um >= 0.0) {
                    errs.push(SchemaError::new("/emitters/generate/min_separation_um", "must be non-negative"));
                }
                // Packing bound: each emitter needs a disc of radius sep/2.
                let side = g.extent_um + g.min_separation_um;
                let capacity = (side / g.min_separation_um.max(1e-9)).powi(2) * 0.6;
                if g.count > 1 && (g.count as f64) > capacity {
                    errs.push(SchemaError::new(
                        "/emitters/generate/count",
                        "too many emitters for the extent at this minimum separation",
                    ));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

fn path_to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Unknown => {}
        }
    }
    out
}

/// Parses and validates a JSON config document.
pub fn parse_config(text: &str) -> Result<SessionConfig, Vec<SchemaError>> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| vec![SchemaError::new("", format!("invalid JSON: {e}"))])?;
    config_from_value(value)
}

pub fn config_from_value(value: Value) -> Result<SessionConfig, Vec<SchemaError>> {
    let Some(obj) = value.as_object() else {
        return Err(vec![SchemaError::new("", "config must be a JSON object")]);
    };
    let mut errs = Vec::new();
    if !obj.contains_key("seed") {
        errs.push(SchemaError::new("/seed", "seed is required; sessions never draw entropy"));
    }
    match obj.get("backend") {
        None => errs.push(SchemaError::new("/backend", "backend is required")),
        Some(Value::Object(b)) if b.len() != 1 => errs.push(SchemaError::new(
            "/backend",
            format!("exactly one of \"kinetics\" or \"microscopic\" is required, got {}", b.len()),
        )),
        _ => {}
    }
    if !errs.is_empty() {
        return Err(errs);
    }
    let config: SessionConfig = serde_path_to_error::deserialize(value)
        .map_err(|e| vec![SchemaError::new(path_to_pointer(e.path()), e.inner().to_string())])?;
    config.validate()?;
    Ok(config)
}
