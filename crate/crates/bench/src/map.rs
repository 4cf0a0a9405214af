//! Wide-field fluorescence maps and their text formats.

use std::io::Write;

use serde::{Deserialize, Serialize};

/// Counts on a regular lateral grid, row-major with y increasing by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluorescenceMap {
    /// Probe detuning, GHz.
    pub probe: f64,
    /// Center of the first pixel, µm.
    pub x0: f64,
    pub y0: f64,
    /// Grid spacing, µm.
    pub step: f64,
    pub width: usize,
    pub height: usize,
    /// s per pixel
    pub dwell: f64,
    pub counts: Vec<f64>,
}

impl FluorescenceMap {
    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.counts[row * self.width + col]
    }

    /// Pixel nearest to a lateral position.
    pub fn pixel_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.x0) / self.step).round();
        let r = ((y - self.y0) / self.step).round();
        (c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height)
            .then_some((c as usize, r as usize))
    }

    /// Plain PGM (P2). Values are rounded counts, scaled down only if they
    /// exceed the 16-bit range; the scale is written as a comment.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let max = self.counts.iter().copied().fold(0.0, f64::max).round();
        let scale = if max > 65535.0 { 65535.0 / max } else { 1.0 };
        let maxval = ((max * scale) as u32).max(1);
        writeln!(out, "P2")?;
        writeln!(
            out,
            "# probe {} GHz, step {} um, origin ({}, {}) um, scale {}",
            self.probe, self.step, self.x0, self.y0, scale
        )?;
        writeln!(out, "{} {}", self.width, self.height)?;
        writeln!(out, "{maxval}")?;
        for row in self.counts.chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(|c| ((c * scale).round() as u32).to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        out.flush()
    }

    /// `x_um,y_um,counts` per pixel.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_um", "y_um", "counts"])?;
        for row in 0..self.height {
            for col in 0..self.width {
                let x = self.x0 + col as f64 * self.step;
                let y = self.y0 + row as f64 * self.step;
                w.write_record([x.to_string(), y.to_string(), self.at(col, row).to_string()])?;
            }
        }
        w.flush()
    }
}

/// Parses a P2 file back into (width, height, maxval, values).
pub fn read_pgm(text: &str) -> Option<(usize, usize, u32, Vec<u32>)> {
    let mut tokens = text.lines().filter(|l| !l.starts_with('#')).flat_map(str::split_whitespace);
    if tokens.next()? != "P2" {
        return None;
    }
    let w: usize = tokens.next()?.parse().ok()?;
    let h: usize = tokens.next()?.parse().ok()?;
    let maxval: u32 = tokens.next()?.parse().ok()?;
    let values: Vec<u32> = tokens.map(|t| t.parse().ok()).collect::<Option<_>>()?;
    (values.len() == w * h).then_some((w, h, maxval, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FluorescenceMap {
        FluorescenceMap {
            probe: 0.0,
            x0: -1.0,
            y0: 2.0,
            step: 0.5,
            width: 3,
            height: 2,
            dwell: 0.1,
            counts: vec![0.0, 1.0, 2.0, 3.0, 4.0, 70000.0],
        }
    }

    #[test]
    fn pgm_round_trip_scales_large_values() {
        let mut buf = Vec::new();
        sample().write_pgm(&mut buf).unwrap();
        let (w, h, maxval, v) = read_pgm(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!((w, h, maxval), (3, 2, 65535));
        assert_eq!(v[5], 65535);
        assert_eq!(v[0], 0);
    }

    #[test]
    fn csv_lists_every_pixel_with_coordinates() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[6], "0,2.5,70000");
    }

    #[test]
    fn pixel_lookup() {
        let m = sample();
        assert_eq!(m.pixel_of(0.0, 2.5), Some((2, 1)));
        assert_eq!(m.pixel_of(5.0, 2.0), None);
    }
}
