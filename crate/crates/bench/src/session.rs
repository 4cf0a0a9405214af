//! One simulated bench: emitters, a shift backend, the random stream, the
//! simulated clock and the log. Every mutating operation runs to
//! completion before the next one starts, and everything it does is logged.

use rand::Rng;
use rand_distr::{Distribution, Poisson, UnitSphere};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zpltune::charge_mc::{photon_energy, step_world, BeamProfile, CascadeRates, ChargeWorld, EnergyLevels};
use zpltune::kinetics::{apply_burst, evolve_idle, sample_params, BurstOutcome, KineticsState};
use zpltune::lineshape::{
    detect_peaks, fit_lorentzian, synthesize_spectrum, track_peaks, FitOptions, PeakFit, ScanConfig, Spectrum,
    TrackState, TrackStatus,
};
use zpltune::stark::lorentzian;
use zpltune::tuner::{choose_target, synchronize, tune_one, TuneBench, TuneReport};
use zpltune::units::mhz_to_ghz;
use zpltune::{draw_count, seeded_rng, Detuning, EmitterId, EmitterState, SimRng, StarkResponse, Vec3};

use crate::config::{BackendConfig, EmitterSpec, SchemaError, SessionConfig};
use crate::error::{BenchError, Result};
use crate::log::{
    BurstRecord, EmitterEffect, EstimateRecord, FitRecord, FitResult, LogEntry, MapRecord, OutcomeRecord, Record,
    ScanRecord, SnapshotRecord, TargetRecord, TrackRecord,
};
use crate::map::FluorescenceMap;
use crate::request::{Aim, AutotuneRequest, BurstRequest, Command, MapRequest, ScanRequest, WaitRequest};

/// Largest number of points in one scan.
pub const SCAN_POINT_LIMIT: usize = 2_000_000;
/// Largest number of pixels in one map.
pub const MAP_PIXEL_LIMIT: usize = 1_000_000;
/// Relative pump intensity below which an emitter is not exposed at all.
const EXPOSURE_FLOOR: f64 = 1e-9;
/// Tracking gate for operator scans, GHz.
const TRACK_GATE_GHZ: f64 = 0.3;
/// Detection weight below which a tracked line is not expected in a scan.
const VISIBLE_WEIGHT: f64 = 0.01;
const SURVEY_MARGIN_GHZ: f64 = 5.0;
const MAX_CANDIDATES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Scanning,
    Bursting,
    Mapping,
    Tuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterView {
    pub id: String,
    /// µm
    pub position: [f64; 3],
    pub axis: [f64; 3],
    /// Configured line position, GHz.
    pub initial: f64,
    /// True line position now, GHz.
    pub current: f64,
    /// MHz
    pub linewidth: f64,
    pub peak_rate: f64,
    pub alive: bool,
    /// Pump dose received at the emitter, mW·s.
    pub dose: f64,
    /// Last fitted center, GHz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub config_hash: String,
    pub backend: String,
    pub phase: Phase,
    pub next_seq: u64,
    pub draws: u64,
    pub clock: f64,
    pub emitters: Vec<EmitterView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinetics: Option<Vec<KineticsState>>,
    pub trapped_charges: usize,
    /// SHA-256 over every trapped charge, empty for the kinetics backend.
    pub charge_digest: String,
}

enum Backend {
    Kinetics(Vec<KineticsState>),
    Micro { world: Box<ChargeWorld>, rates: CascadeRates },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutput {
    pub seq: u64,
    pub spectrum: Spectrum,
    pub fits: Vec<PeakFit>,
    pub tracks: Vec<TrackRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommandOutput {
    Scan(ScanOutput),
    Burst(BurstRecord),
    Wait { clock: f64 },
    Map(FluorescenceMap),
    Autotune(TuneReport),
}

type Observer = Box<dyn FnMut(&LogEntry) + Send>;

pub struct Session {
    config: SessionConfig,
    hash: String,
    response: StarkResponse,
    emitters: Vec<EmitterState>,
    dose: Vec<f64>,
    backend: Backend,
    rng: SimRng,
    clock: f64,
    track: TrackState,
    log: Vec<LogEntry>,
    phase: Phase,
    observer: Option<Observer>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session").field("hash", &self.hash).field("clock", &self.clock).finish_non_exhaustive()
    }
}

fn random_axis(rng: &mut SimRng) -> Vec3 {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vec3::new(x, y, z)
}

fn build_emitters(config: &SessionConfig, rng: &mut SimRng) -> Result<Vec<EmitterState>> {
    let host = config.host;
    let orient = |given: Option<[f64; 3]>, rng: &mut SimRng| match given {
        Some(a) => Vec3::from(a).normalize(),
        None if host.is_red_only() => Vec3::z(),
        None => random_axis(rng),
    };
    let mut out = Vec::new();
    match &config.emitters {
        EmitterSpec::List(list) => {
            for e in list {
                let mut s = EmitterState::new(e.id.clone(), Vec3::new(e.x, e.y, e.z), e.detuning);
                s.linewidth = e.linewidth.unwrap_or_else(|| host.linewidth());
                s.peak_rate = e.peak_rate.unwrap_or(s.peak_rate);
                s.axis = orient(e.axis, rng);
                out.push(s);
            }
        }
        EmitterSpec::Generate(g) => {
            let mut placed: Vec<Vec3> = Vec::new();
            for k in 0..g.count {
                let mut attempts = 0;
                let p = loop {
                    let p = Vec3::new(rng.random::<f64>() * g.extent_um, rng.random::<f64>() * g.extent_um, 0.0);
                    if placed.iter().all(|q| (q - p).norm() >= g.min_separation_um) {
                        break p;
                    }
                    attempts += 1;
                    if attempts > 10_000 {
                        return Err(BenchError::Schema(vec![SchemaError {
                            pointer: "/emitters/generate/count".into(),
                            message: "could not place emitters at the requested separation".into(),
                        }]));
                    }
                };
                placed.push(p);
                let mut s = EmitterState::new(format!("e{k}"), p, rng.random::<f64>() * g.spread_ghz);
                s.linewidth = host.linewidth();
                s.axis = orient(None, rng);
                out.push(s);
            }
        }
    }
    for e in &out {
        e.validate(zpltune::emitter::LINEWIDTH_BAND_MHZ)?;
    }
    Ok(out)
}

impl Session {
    /// Builds the initial state from a validated config and logs it.
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate().map_err(BenchError::Schema)?;
        let mut rng = seeded_rng(config.seed);
        let emitters = build_emitters(&config, &mut rng)?;
        let host = config.host;
        let backend = match &config.backend {
            BackendConfig::Kinetics(_) => {
                let ranges = config.kinetics_ranges();
                Backend::Kinetics(
                    emitters.iter().map(|e| KineticsState::new(sample_params(&ranges, &mut rng), e.zpl)).collect(),
                )
            }
            BackendConfig::Microscopic(m) => {
                let rates = m.rates.unwrap_or_else(|| host.cascade_rates());
                let layout = m.layout.unwrap_or_else(|| host.donor_layout());
                let levels =
                    EnergyLevels { e_s1: photon_energy(config.reference_wavelength()), ..host.energy_levels() };
                let world = ChargeWorld::around_emitters(
                    &emitters,
                    &layout,
                    levels,
                    &rates,
                    m.epsilon_r,
                    config.seed,
                    &mut rng,
                );
                Backend::Micro { world: Box::new(world), rates }
            }
        };
        let mut s = Self {
            hash: config.hash(),
            response: host.stark_response(),
            dose: vec![0.0; emitters.len()],
            emitters,
            backend,
            rng,
            clock: 0.0,
            track: TrackState::default(),
            log: Vec::new(),
            phase: Phase::Idle,
            observer: None,
            config,
        };
        let snapshot = SnapshotRecord { config_hash: s.hash.clone(), state: s.state() };
        s.push(Record::Snapshot(snapshot));
        Ok(s)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn emitters(&self) -> &[EmitterState] {
        &self.emitters
    }

    /// Every log entry is handed to `f` as it is written.
    pub fn set_observer(&mut self, f: impl FnMut(&LogEntry) + Send + 'static) {
        self.observer = Some(Box::new(f));
    }

    fn push(&mut self, record: Record) -> u64 {
        let entry =
            LogEntry { seq: self.log.len() as u64, draws: draw_count(&self.rng) as u64, clock: self.clock, record };
        if let Some(f) = self.observer.as_mut() {
            f(&entry);
        }
        self.log.push(entry);
        self.log.len() as u64 - 1
    }

    fn index_of(&self, id: &str) -> Result<usize> {
        self.emitters.iter().position(|e| e.id.0 == id).ok_or_else(|| BenchError::NotFound(format!("emitter {id:?}")))
    }

    /// Stark shift accumulated by emitter `i`, GHz.
    pub fn shift_of(&self, i: usize) -> f64 {
        match &self.backend {
            Backend::Kinetics(k) => k[i].current_shift + k[i].jump_offset,
            Backend::Micro { world, .. } => world.probe_shift(i, &self.response, &self.emitters[i].axis),
        }
    }

    /// True line position of emitter `i`.
    pub fn line_of(&self, i: usize) -> Detuning {
        self.emitters[i].zpl + self.shift_of(i)
    }

    fn shifts(&self) -> Vec<f64> {
        (0..self.emitters.len()).map(|i| self.shift_of(i)).collect()
    }

    pub fn state(&self) -> SessionState {
        let emitters = self
            .emitters
            .iter()
            .enumerate()
            .map(|(i, e)| EmitterView {
                id: e.id.0.clone(),
                position: e.position.into(),
                axis: e.axis.into(),
                initial: e.zpl.0,
                current: self.line_of(i).0,
                linewidth: e.linewidth,
                peak_rate: e.peak_rate,
                alive: e.alive,
                dose: self.dose[i],
                tracked: self.track.get(&e.id).map(|t| t.last.center),
            })
            .collect();
        let (backend, kinetics, trapped, digest) = match &self.backend {
            Backend::Kinetics(k) => ("kinetics", Some(k.clone()), 0, String::new()),
            Backend::Micro { world, .. } => {
                let mut h = Sha256::new();
                for c in &world.charges {
                    for v in [c.position.x, c.position.y, c.position.z] {
                        h.update(v.to_le_bytes());
                    }
                    h.update([c.charge as u8]);
                }
                let hex = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
                ("microscopic", None, world.charges.len(), hex)
            }
        };
        SessionState {
            config_hash: self.hash.clone(),
            backend: backend.into(),
            phase: self.phase,
            next_seq: self.log.len() as u64,
            draws: draw_count(&self.rng) as u64,
            clock: self.clock,
            emitters,
            kinetics,
            trapped_charges: trapped,
            charge_digest: digest,
        }
    }

    fn aim_point(&self, aim: &Aim) -> Result<[f64; 2]> {
        match aim {
            Aim::Emitter(id) => {
                let p = self.emitters[self.index_of(id)?].position;
                Ok([p.x, p.y])
            }
            Aim::Position(p) if p.iter().all(|v| v.is_finite()) => Ok(*p),
            Aim::Position(_) => Err(BenchError::invalid("/aim/position", "position must be finite")),
        }
    }

    fn weight(&self, i: usize, at: [f64; 2], waist: f64) -> f64 {
        let p = self.emitters[i].position;
        let d2 = (p.x - at[0]).powi(2) + (p.y - at[1]).powi(2);
        (-2.0 * d2 / (waist * waist)).exp()
    }

    fn check_power(&self, pointer: &str, power: f64) -> Result<()> {
        let max = self.config.instrument.p_max;
        if !(power >= 0.0 && power <= max) {
            return Err(BenchError::limit(pointer, format!("pump power {power} mW outside [0, {max}] mW")));
        }
        Ok(())
    }

    /// Runs any command and returns its result.
    pub fn execute(&mut self, cmd: &Command) -> Result<CommandOutput> {
        match cmd {
            Command::Scan(r) => self.scan(r).map(CommandOutput::Scan),
            Command::Burst(r) => self.burst(r).map(CommandOutput::Burst),
            Command::Wait(r) => self.wait(r).map(|_| CommandOutput::Wait { clock: self.clock }),
            Command::Map(r) => self.map(r).map(CommandOutput::Map),
            Command::Autotune(r) => self.autotune(r).map(CommandOutput::Autotune),
        }
    }

    fn resolve_scan(&self, req: &ScanRequest) -> Result<ScanConfig> {
        let d = self.config.instrument.scan;
        let scan = ScanConfig {
            start: req.start,
            stop: req.stop,
            step: mhz_to_ghz(req.step_mhz.unwrap_or(d.step_mhz)),
            dwell: req.dwell.unwrap_or(d.dwell_s),
            probe_power: req.probe_power,
        };
        if !(scan.start.is_finite() && scan.stop.is_finite() && scan.start < scan.stop) {
            return Err(BenchError::invalid("/stop", "scan window must satisfy start < stop"));
        }
        if !(scan.step > 0.0) {
            return Err(BenchError::invalid("/step_mhz", "step must be positive"));
        }
        if !(scan.dwell > 0.0) {
            return Err(BenchError::invalid("/dwell", "dwell must be positive"));
        }
        if !(scan.probe_power >= 0.0) {
            return Err(BenchError::invalid("/probe_power", "probe power must be non-negative"));
        }
        if (scan.stop - scan.start) / scan.step > SCAN_POINT_LIMIT as f64 {
            return Err(BenchError::limit("/step_mhz", format!("more than {SCAN_POINT_LIMIT} points")));
        }
        Ok(scan)
    }

    fn fit_spectrum(&self, spectrum: &Spectrum, pump_power: f64) -> Vec<FitResult> {
        let gamma = self.config.host.linewidth();
        let bg = self.config.instrument.noise.background(pump_power) * spectrum.dwell;
        let threshold = 6.0 * bg.sqrt() + 3.0;
        let opts = FitOptions { gamma_guess_mhz: gamma, ..FitOptions::default() };
        let mut out: Vec<FitResult> = Vec::new();
        let mut accepted: Vec<f64> = Vec::new();
        for c in detect_peaks(spectrum, threshold).into_iter().take(MAX_CANDIDATES) {
            let result = match fit_lorentzian(spectrum, &c, &opts) {
                Ok(mut f) if f.converged && f.amplitude > 0.0 && f.fwhm > 0.2 * gamma && f.fwhm < 5.0 * gamma => {
                    if accepted.iter().any(|a| (a - f.center).abs() < mhz_to_ghz(gamma) / 2.0) {
                        FitResult { candidate: c.center, fit: None, error: Some("duplicate of a stronger line".into()) }
                    } else {
                        if !f.center_stderr.is_finite() {
                            f.center_stderr = f64::MAX;
                        }
                        accepted.push(f.center);
                        FitResult { candidate: c.center, fit: Some(f), error: None }
                    }
                }
                Ok(f) => FitResult {
                    candidate: c.center,
                    fit: None,
                    error: Some(format!("implausible line: width {:.1} MHz, amplitude {:.1}", f.fwhm, f.amplitude)),
                },
                Err(e) => FitResult { candidate: c.center, fit: None, error: Some(e.to_string()) },
            };
            out.push(result);
        }
        out
    }

    /// Synthesizes, fits and logs one scan without touching the track.
    fn acquire(&mut self, req: &ScanRequest) -> Result<(Spectrum, FitRecord, u64)> {
        let scan = self.resolve_scan(req)?;
        let at = req.aim.as_ref().map(|a| self.aim_point(a)).transpose()?;
        let pump = match &req.pump {
            Some(p) => {
                self.check_power("/pump/power", p.power)?;
                Some((self.aim_point(&p.aim)?, p.power))
            }
            None => None,
        };
        let pump_power = pump.map_or(0.0, |p| p.1);
        let psf = self.config.instrument.psf_waist_um;
        let mut seen = self.emitters.clone();
        if let Some(at) = at {
            for (i, e) in seen.iter_mut().enumerate() {
                e.peak_rate *= self.weight(i, at, psf);
            }
        }
        let shifts = self.shifts();
        let noise = self.config.instrument.noise;
        let spectrum = synthesize_spectrum(&seen, &shifts, &scan, pump_power, &noise, self.clock, &mut self.rng)?;
        self.clock += scan.duration();
        let exposure = match pump {
            Some((c, p)) if p > 0.0 => self.expose(c, p, scan.duration())?.0,
            _ => Vec::new(),
        };
        let results = self.fit_spectrum(&spectrum, pump_power);
        let seq = self.push(Record::Scan(ScanRecord {
            request: req.clone(),
            scan,
            pump_power,
            counts: spectrum.counts.clone(),
            exposure,
        }));
        let fits = FitRecord { results };
        self.push(Record::Fit(fits.clone()));
        Ok((spectrum, fits, seq))
    }

    /// Excitation scan; fitted lines update the track of emitters that the
    /// scan could see.
    pub fn scan(&mut self, req: &ScanRequest) -> Result<ScanOutput> {
        self.phase = Phase::Scanning;
        let out = self.scan_inner(req);
        self.phase = Phase::Idle;
        out
    }

    fn scan_inner(&mut self, req: &ScanRequest) -> Result<ScanOutput> {
        let (spectrum, fits, seq) = self.acquire(req)?;
        let fits: Vec<PeakFit> = fits.fits().copied().collect();
        let at = req.aim.as_ref().map(|a| self.aim_point(a)).transpose()?;
        let psf = self.config.instrument.psf_waist_um;
        let mut sub = TrackState::default();
        for (i, e) in self.emitters.iter().enumerate() {
            let Some(t) = self.track.get(&e.id) else {
                continue;
            };
            let visible = at.is_none_or(|a| self.weight(i, a, psf) >= VISIBLE_WEIGHT);
            if visible && t.last.center >= req.start && t.last.center <= req.stop {
                sub.entries.insert(e.id.clone(), *t);
            }
        }
        let mut tracks = Vec::new();
        if let Some(Aim::Emitter(id)) = &req.aim {
            let key = EmitterId::new(id.clone());
            if self.track.get(&key).is_none() {
                if let Some(best) = fits.iter().max_by(|a, b| a.amplitude.total_cmp(&b.amplitude)) {
                    tracks.push(self.note(&key, best, TrackStatus::Tracked));
                }
            }
        }
        if !sub.entries.is_empty() {
            let updated = track_peaks(&sub, &fits, TRACK_GATE_GHZ);
            for (id, e) in updated.entries {
                tracks.push(self.note(&id, &e.last, e.status));
            }
        }
        Ok(ScanOutput { seq, spectrum, fits, tracks })
    }

    fn note(&mut self, id: &EmitterId, fit: &PeakFit, status: TrackStatus) -> TrackRecord {
        self.track.insert(id.clone(), *fit);
        if let Some(e) = self.track.entries.get_mut(id) {
            e.status = status;
        }
        let rec = TrackRecord { id: id.0.clone(), fit: *fit, status };
        self.push(Record::Track(rec.clone()));
        rec
    }

    /// Pump exposure centered at `at`. Returns per-emitter effects and the
    /// number of ionization events for the microscopic backend.
    fn expose(&mut self, at: [f64; 2], power: f64, duration: f64) -> Result<(Vec<EmitterEffect>, Option<u64>)> {
        let waist = self.config.instrument.beam_waist_um;
        let g: Vec<f64> = (0..self.emitters.len()).map(|i| self.weight(i, at, waist)).collect();
        let before = self.shifts();
        let mut effects = Vec::new();
        let mut ionizations = None;
        match &mut self.backend {
            Backend::Kinetics(states) => {
                for (i, e) in self.emitters.iter_mut().enumerate() {
                    if !e.alive || g[i] <= EXPOSURE_FLOOR {
                        continue;
                    }
                    let (s, outcome) = apply_burst(&states[i], power * g[i], duration, &mut self.rng);
                    states[i] = s;
                    self.dose[i] += power * g[i] * duration;
                    if outcome == BurstOutcome::Bleached {
                        e.alive = false;
                    }
                    let shift = s.current_shift + s.jump_offset - before[i];
                    effects.push(EmitterEffect { id: e.id.0.clone(), intensity: g[i], shift, outcome });
                }
            }
            Backend::Micro { world, rates } => {
                let beam = BeamProfile { waist, ..BeamProfile::at(at[0], at[1], power, self.config.pump_wavelength()) };
                let summary = step_world(world, &beam, duration, rates, &mut self.rng)?;
                ionizations = Some(summary.events);
                for (i, e) in self.emitters.iter().enumerate() {
                    let now = world.probe_shift(i, &self.response, &e.axis);
                    if g[i] > EXPOSURE_FLOOR {
                        self.dose[i] += power * g[i] * duration;
                    }
                    if g[i] > EXPOSURE_FLOOR || now != before[i] {
                        effects.push(EmitterEffect {
                            id: e.id.0.clone(),
                            intensity: g[i],
                            shift: now - before[i],
                            outcome: BurstOutcome::Shifted,
                        });
                    }
                }
            }
        }
        Ok((effects, ionizations))
    }

    /// Pump burst. A zero power or duration is logged as a no-op.
    pub fn burst(&mut self, req: &BurstRequest) -> Result<BurstRecord> {
        self.fire(req, None)
    }

    fn fire(&mut self, req: &BurstRequest, predicted: Option<Detuning>) -> Result<BurstRecord> {
        self.check_power("/power", req.power)?;
        let dt_max = self.config.instrument.dt_max;
        if !(req.duration >= 0.0 && req.duration <= dt_max) {
            return Err(BenchError::limit("/duration", format!("duration {} s outside [0, {dt_max}] s", req.duration)));
        }
        let at = self.aim_point(&req.aim)?;
        self.phase = Phase::Bursting;
        let result = if req.power > 0.0 && req.duration > 0.0 {
            self.expose(at, req.power, req.duration)
        } else {
            Ok((Vec::new(), None))
        };
        self.phase = Phase::Idle;
        let (effects, ionizations) = result?;
        self.clock += req.duration;
        let rec = BurstRecord { request: req.clone(), predicted, dose: req.power * req.duration, effects, ionizations };
        self.push(Record::Burst(rec.clone()));
        Ok(rec)
    }

    /// Pump off for a while. Trapped charge is permanent, so nothing moves.
    pub fn wait(&mut self, req: &WaitRequest) -> Result<()> {
        if !(req.seconds >= 0.0 && req.seconds.is_finite()) {
            return Err(BenchError::invalid("/seconds", "must be a non-negative number"));
        }
        if let Backend::Kinetics(states) = &mut self.backend {
            for s in states.iter_mut() {
                *s = evolve_idle(s, req.seconds);
            }
        }
        self.clock += req.seconds;
        self.push(Record::Wait(*req));
        Ok(())
    }

    /// Wide-field image at a fixed probe frequency.
    pub fn map(&mut self, req: &MapRequest) -> Result<FluorescenceMap> {
        let ok = |v: f64| v.is_finite();
        if !(req.step_um > 0.0 && ok(req.step_um)) {
            return Err(BenchError::invalid("/step_um", "step must be positive"));
        }
        if !(ok(req.x[0]) && ok(req.x[1]) && req.x[0] <= req.x[1]) {
            return Err(BenchError::invalid("/x", "field of view must be [lo, hi]"));
        }
        if !(ok(req.y[0]) && ok(req.y[1]) && req.y[0] <= req.y[1]) {
            return Err(BenchError::invalid("/y", "field of view must be [lo, hi]"));
        }
        if !(req.dwell > 0.0 && ok(req.dwell)) {
            return Err(BenchError::invalid("/dwell", "dwell must be positive"));
        }
        if !(req.probe_power >= 0.0 && ok(req.probe)) {
            return Err(BenchError::invalid("/probe", "probe frequency and power must be valid"));
        }
        let width = ((req.x[1] - req.x[0]) / req.step_um + 1e-9).floor() as usize + 1;
        let height = ((req.y[1] - req.y[0]) / req.step_um + 1e-9).floor() as usize + 1;
        if width.saturating_mul(height) > MAP_PIXEL_LIMIT {
            return Err(BenchError::limit("/step_um", format!("more than {MAP_PIXEL_LIMIT} pixels")));
        }
        self.phase = Phase::Mapping;
        let psf = self.config.instrument.psf_waist_um;
        let noise = self.config.instrument.noise;
        let brightness: Vec<(f64, f64, f64)> = (0..self.emitters.len())
            .filter(|&i| self.emitters[i].alive)
            .map(|i| {
                let e = &self.emitters[i];
                let peak = lorentzian(req.probe, self.line_of(i).0, e.linewidth, e.peak_rate * req.probe_power, 0.0);
                (e.position.x, e.position.y, peak)
            })
            .collect();
        let mut counts = Vec::with_capacity(width * height);
        let mut failure = None;
        for r in 0..height {
            let y = req.y[0] + r as f64 * req.step_um;
            for c in 0..width {
                let x = req.x[0] + c as f64 * req.step_um;
                let mut rate = noise.dark_rate;
                for &(ex, ey, peak) in &brightness {
                    let d2 = (x - ex).powi(2) + (y - ey).powi(2);
                    rate += peak * (-2.0 * d2 / (psf * psf)).exp();
                }
                let mean = rate * req.dwell;
                let n = if noise.noiseless || mean <= 0.0 {
                    mean.max(0.0)
                } else {
                    match Poisson::new(mean) {
                        Ok(p) => p.sample(&mut self.rng),
                        Err(e) => {
                            failure = Some(e.to_string());
                            0.0
                        }
                    }
                };
                counts.push(n);
            }
        }
        self.phase = Phase::Idle;
        if let Some(msg) = failure {
            return Err(BenchError::invalid("/dwell", msg));
        }
        self.clock += req.dwell;
        let map = FluorescenceMap {
            probe: req.probe,
            x0: req.x[0],
            y0: req.y[0],
            step: req.step_um,
            width,
            height,
            dwell: req.dwell,
            counts,
        };
        self.push(Record::Map(MapRecord { request: *req, width, height, counts: map.counts.clone() }));
        Ok(map)
    }

    /// Finds untracked emitters, then runs the synchronization loop.
    pub fn autotune(&mut self, req: &AutotuneRequest) -> Result<TuneReport> {
        let plan = req.plan;
        plan.validate().map_err(|e| BenchError::invalid("/plan", e.to_string()))?;
        let inst = self.config.instrument;
        if plan.p_max > inst.p_max {
            return Err(BenchError::limit(
                "/plan/p_max",
                format!("plan p_max exceeds the instrument limit {} mW", inst.p_max),
            ));
        }
        if plan.dt_max > inst.dt_max {
            return Err(BenchError::limit(
                "/plan/dt_max",
                format!("plan dt_max exceeds the instrument limit {} s", inst.dt_max),
            ));
        }
        let ids: Vec<EmitterId> = match &req.ids {
            Some(ids) => {
                ids.iter().map(|i| self.index_of(i).map(|k| self.emitters[k].id.clone())).collect::<Result<_>>()?
            }
            None => self.emitters.iter().map(|e| e.id.clone()).collect(),
        };
        if ids.is_empty() {
            return Err(BenchError::invalid("/ids", "no emitters selected"));
        }
        let window = match req.survey {
            Some(w) if w[0] < w[1] => w,
            Some(_) => return Err(BenchError::invalid("/survey", "survey window must satisfy lo < hi")),
            None => {
                let lo = self.emitters.iter().map(|e| e.zpl.0).fold(f64::INFINITY, f64::min);
                let hi = self.emitters.iter().map(|e| e.zpl.0).fold(f64::NEG_INFINITY, f64::max);
                [lo - SURVEY_MARGIN_GHZ, hi + SURVEY_MARGIN_GHZ]
            }
        };
        self.push(Record::Autotune(req.clone()));
        self.phase = Phase::Tuning;
        let result = self.autotune_inner(&ids, window, req);
        self.phase = Phase::Idle;
        let report = result?;
        self.push(Record::Target(TargetRecord { target: report.target, tolerance: report.tolerance }));
        for e in &report.entries {
            self.push(Record::Estimate(EstimateRecord { id: e.id.0.clone(), estimate: e.estimate.clone() }));
        }
        self.push(Record::Outcome(OutcomeRecord { report: report.clone() }));
        Ok(report)
    }

    fn autotune_inner(&mut self, ids: &[EmitterId], window: [f64; 2], req: &AutotuneRequest) -> Result<TuneReport> {
        for id in ids {
            if self.track.get(id).is_none() {
                let scan = ScanRequest::window(window[0], window[1]).aimed(Aim::Emitter(id.0.clone()));
                let (_, fits, _) = self.acquire(&scan)?;
                if let Some(best) = fits.fits().max_by(|a, b| a.amplitude.total_cmp(&b.amplitude)).copied() {
                    self.note(id, &best, TrackStatus::Tracked);
                }
            }
        }
        let plan = req.plan;
        if ids.len() >= 2 {
            return Ok(synchronize(ids, self, &plan)?);
        }
        let id = &ids[0];
        let Some(nu) = self.last_center(id) else {
            return Err(zpltune::Error::NoLiveEmitters.into());
        };
        let target = match plan.target {
            Some(t) => t,
            None => {
                let probe = EmitterState::new(id.0.clone(), Vec3::zeros(), nu.0);
                choose_target(&[probe], &self.response, &plan)?
            }
        };
        let entry = tune_one(id, self, &plan, target)?;
        Ok(TuneReport { target, tolerance: plan.tolerance, entries: vec![entry], cross_talk: Vec::new() })
    }
}

fn to_core(e: BenchError) -> zpltune::Error {
    match e {
        BenchError::Core(e) => e,
        other => zpltune::Error::InvalidArgument(other.to_string()),
    }
}

impl TuneBench for Session {
    fn response(&self) -> StarkResponse {
        self.response
    }

    fn priors(&self) -> (f64, f64) {
        let r = self.config.host.kinetics_ranges();
        (r.alpha_prior, r.kappa_prior())
    }

    fn last_center(&self, id: &EmitterId) -> Option<Detuning> {
        self.track.get(id).map(|t| Detuning(t.last.center))
    }

    fn scan(&mut self, id: &EmitterId, center: Detuning, half_width: f64) -> zpltune::Result<Vec<PeakFit>> {
        let req = ScanRequest::window(center.0 - half_width, center.0 + half_width).aimed(Aim::Emitter(id.0.clone()));
        let (_, fits, _) = self.acquire(&req).map_err(to_core)?;
        Ok(fits.fits().copied().collect())
    }

    fn burst(&mut self, id: &EmitterId, power: f64, duration: f64, predicted: Detuning) -> zpltune::Result<()> {
        let req = BurstRequest { aim: Aim::Emitter(id.0.clone()), power, duration };
        self.fire(&req, Some(predicted)).map(|_| ()).map_err(to_core)
    }

    fn note_center(&mut self, id: &EmitterId, fit: &PeakFit, status: TrackStatus) {
        self.note(id, fit, status);
    }
}
