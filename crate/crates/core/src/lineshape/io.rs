//! Spectrum files: `freq_ghz,counts` CSV plus a JSON metadata sidecar.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::spectrum::{ScanConfig, Spectrum};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub scan: ScanConfig,
    pub pump_on: bool,
    pub pump_power: f64,
    pub timestamp: f64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Row {
    freq_ghz: f64,
    counts: f64,
}

pub fn write_csv<W: Write>(spectrum: &Spectrum, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (&freq_ghz, &counts) in spectrum.freqs.iter().zip(&spectrum.counts) {
        w.serialize(Row { freq_ghz, counts })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R, meta: &SpectrumMeta) -> Result<Spectrum> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["freq_ghz", "counts"] {
        return Err(Error::Io(format!("unexpected CSV header {headers:?}")));
    }
    let mut freqs = Vec::new();
    let mut counts = Vec::new();
    for row in r.deserialize() {
        let row: Row = row?;
        freqs.push(row.freq_ghz);
        counts.push(row.counts);
    }
    let s = Spectrum {
        freqs,
        counts,
        dwell: meta.scan.dwell,
        pump_on: meta.pump_on,
        pump_power: meta.pump_power,
        timestamp: meta.timestamp,
    };
    s.validate()?;
    Ok(s)
}

pub fn write_meta<W: Write>(meta: &SpectrumMeta, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, meta)?;
    Ok(())
}

pub fn read_meta<R: Read>(input: R) -> Result<SpectrumMeta> {
    Ok(serde_json::from_reader(input)?)
}
