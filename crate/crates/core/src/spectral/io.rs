//! Field files and per-frequency CSV export.
//!
//! A field file is one line of compact JSON header, a newline, then
//! little-endian `f64` values in row-major order (real/imaginary interleaved
//! for coefficients).

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Grid, PeriodicField, SpectralField};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Samples,
    Coeffs,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "N")]
    pub fiber: usize,
    pub layout: String,
    pub kind: FieldKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Samples(PeriodicField),
    Coeffs(SpectralField),
}

fn write_header(w: &mut impl Write, grid: Grid, fiber: usize, kind: FieldKind) -> Result<()> {
    let h = FieldHeader {
        d: grid.dim(),
        n: grid.n(),
        fiber,
        layout: "row-major".into(),
        kind,
    };
    serde_json::to_writer(&mut *w, &h)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_samples(w: &mut impl Write, field: &PeriodicField) -> Result<()> {
    write_header(w, field.grid(), field.fiber(), FieldKind::Samples)?;
    for v in field.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_coeffs(w: &mut impl Write, spec: &SpectralField) -> Result<()> {
    write_header(w, spec.grid(), spec.fiber(), FieldKind::Coeffs)?;
    for c in spec.coeffs() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field(r: impl Read) -> Result<FieldData> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let h: FieldHeader = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Format(format!("header: {e}")))?;
    if h.layout != "row-major" {
        return Err(Error::Format(format!("unsupported layout `{}`", h.layout)));
    }
    let grid = Grid::new(h.d, h.n)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let per = match h.kind {
        FieldKind::Samples => 1,
        FieldKind::Coeffs => 2,
    };
    let expected = grid.len() * h.fiber * per * 8;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    Ok(match h.kind {
        FieldKind::Samples => FieldData::Samples(PeriodicField::new(grid, h.fiber, vals)?),
        FieldKind::Coeffs => FieldData::Coeffs(SpectralField::new(
            grid,
            h.fiber,
            vals.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect(),
        )?),
    })
}

pub fn save_samples(path: &Path, field: &PeriodicField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_samples(&mut f, field)?;
    f.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<FieldData> {
    read_field(std::fs::File::open(path)?)
}

/// CSV with columns `k1..kd, magnitude`: the Euclidean norm of each
/// coefficient vector, frequencies in FFT order.
pub fn write_magnitude_csv(w: impl Write, spec: &SpectralField) -> Result<()> {
    let grid = spec.grid();
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=grid.dim()).map(|a| format!("k{a}")).collect();
    header.push("magnitude".into());
    out.write_record(&header)?;
    for (idx, c) in spec.modes().enumerate() {
        let mut rec: Vec<String> = grid.freq(idx).iter().map(|k| k.to_string()).collect();
        let mag = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        rec.push(format!("{mag:e}"));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
