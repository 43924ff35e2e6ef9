//! Trace files with JSON sidecars, spectrum and table exports.
//!
//! A trace `name` is stored as `name.csv` (columns `time,value`, preceded by
//! a `# config_hash:` comment) or `name.bin` (magic `NVMXTRC1`, the 32-byte
//! config hash, a little-endian u64 count, then little-endian f64 samples),
//! next to `name.json` holding the sampling metadata.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Spectrum;
use crate::trace::{TimeTrace, Unit};

const BIN_MAGIC: &[u8; 8] = b"NVMXTRC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    Bin,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Bin => "bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSidecar {
    pub name: String,
    pub sample_rate: f64,
    pub unit: Unit,
    pub start_time: f64,
    pub len: usize,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub format: TraceFormat,
}

/// Writes `dir/name.{csv,bin}` and `dir/name.json`; returns the data path.
pub fn write_trace(
    dir: &Path,
    name: &str,
    trace: &TimeTrace,
    format: TraceFormat,
    config_hash: &str,
    seed: Option<u64>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.{}", format.extension()));
    let mut w = BufWriter::new(fs::File::create(&path)?);
    match format {
        TraceFormat::Csv => {
            writeln!(w, "# config_hash: {config_hash}")?;
            writeln!(w, "# unit: {}", trace.unit)?;
            writeln!(w, "time,value")?;
            for (t, v) in trace.times().zip(&trace.samples) {
                writeln!(w, "{t},{v}")?;
            }
        }
        TraceFormat::Bin => {
            let hash = hash_bytes(config_hash)?;
            w.write_all(BIN_MAGIC)?;
            w.write_all(&hash)?;
            w.write_all(&(trace.len() as u64).to_le_bytes())?;
            for v in &trace.samples {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    let sidecar = TraceSidecar {
        name: name.to_string(),
        sample_rate: trace.sample_rate,
        unit: trace.unit,
        start_time: trace.start_time,
        len: trace.len(),
        seed,
        config_hash: config_hash.to_string(),
        format,
    };
    write_json(&path.with_extension("json"), &sidecar)?;
    Ok(path)
}

fn hash_bytes(config_hash: &str) -> Result<[u8; 32]> {
    let v = hex::decode(config_hash).map_err(|e| Error::Data(format!("config hash is not hex: {e}")))?;
    v.try_into()
        .map_err(|_| Error::Data("config hash must be 32 bytes".into()))
}

/// Reads a trace and its sidecar. The data file may be given with or
/// without extension.
pub fn read_trace(path: &Path) -> Result<(TimeTrace, TraceSidecar)> {
    let sidecar_path = path.with_extension("json");
    let text = fs::read_to_string(&sidecar_path).map_err(|e| {
        Error::Data(format!("missing or unreadable sidecar {}: {e}", sidecar_path.display()))
    })?;
    let meta: TraceSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("bad sidecar {}: {e}", sidecar_path.display())))?;
    let data_path = path.with_extension(meta.format.extension());
    let samples = match meta.format {
        TraceFormat::Csv => read_csv_values(&data_path)?,
        TraceFormat::Bin => read_bin_values(&data_path, &meta.config_hash)?,
    };
    if samples.len() != meta.len {
        return Err(Error::Data(format!(
            "{}: sidecar declares {} samples, file holds {}",
            data_path.display(),
            meta.len,
            samples.len()
        )));
    }
    let trace = TimeTrace::new(samples, meta.sample_rate, meta.unit, meta.start_time)?;
    Ok((trace, meta))
}

/// Reads a trace and requires `unit`.
pub fn read_trace_with_unit(path: &Path, unit: Unit) -> Result<(TimeTrace, TraceSidecar)> {
    let (trace, meta) = read_trace(path)?;
    if meta.unit != unit {
        return Err(Error::UnitMismatch {
            expected: unit.to_string(),
            found: meta.unit.to_string(),
        });
    }
    Ok((trace, meta))
}

fn read_csv_values(path: &Path) -> Result<Vec<f64>> {
    let r = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    let mut header_seen = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if line.starts_with("time") {
                continue;
            }
        }
        let value = line
            .split(',')
            .nth(1)
            .ok_or_else(|| Error::Data(format!("{}:{}: expected `time,value`", path.display(), i + 1)))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

fn read_bin_values(path: &Path, config_hash: &str) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |what: &str| Error::Data(format!("{}: {what}", path.display()));
    if bytes.len() < 48 || &bytes[..8] != BIN_MAGIC {
        return Err(bad("not an nvmux binary trace"));
    }
    if bytes[8..40] != hash_bytes(config_hash)? {
        return Err(bad("config hash differs from sidecar"));
    }
    let n = u64::from_le_bytes(bytes[40..48].try_into().expect("8 bytes")) as usize;
    let body = &bytes[48..];
    if body.len() != n * 8 {
        return Err(bad("length field does not match payload"));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// `frequency,asd` columns for plotting.
pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum, config_hash: &str) -> Result<()> {
    let rows: Vec<Vec<f64>> = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.asd)
        .map(|(f, a)| vec![*f, *a])
        .collect();
    write_table_csv(path, &["frequency", "asd"], &rows, config_hash)
}

pub fn write_table_csv(path: &Path, columns: &[&str], rows: &[Vec<f64>], config_hash: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# config_hash: {config_hash}")?;
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}
