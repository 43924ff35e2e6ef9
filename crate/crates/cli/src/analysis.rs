use std::path::Path;

use nvmux::config::AnalysisSpec;
use nvmux::io::{write_spectrum_csv, write_table_csv};
use nvmux::multiplex::{
    balance, calibrate_field, calibrate_temperature, combine, CalibrationResult, Channel,
    DEFAULT_BALANCE_RANGE_DEG, DEFAULT_BALANCE_STEP_DEG,
};
use nvmux::spectral::{fit_tone, harmonic_table, isolation_factor, sensitivity_floor, welch, HarmonicTable};
use nvmux::{Error, Result, TimeTrace};
use serde_json::{json, Map, Value};

use crate::report::ReportBuilder;

/// Runs `spec` on named traces; writes spectra and tables into `dir`.
pub fn run(
    spec: &AnalysisSpec,
    traces: &[(String, TimeTrace)],
    reference: Option<&TimeTrace>,
    dir: &Path,
    report: &mut ReportBuilder,
) -> Result<Value> {
    for (name, t) in traces {
        if t.unit != spec.unit {
            return Err(Error::UnitMismatch {
                expected: spec.unit.to_string(),
                found: format!("{} (trace {name})", t.unit),
            });
        }
    }
    let hash = report.config_hash.clone();
    let mut out = Map::new();

    let mut tone_rows = Vec::new();
    for (name, t) in traces {
        for &f in &spec.tones {
            let fit = fit_tone(t, f)?;
            tone_rows.push(json!({
                "trace": name,
                "frequency": f,
                "rms": fit.rms,
                "phase": fit.phase(),
                "snr_db": fit.snr_db(),
            }));
        }
    }
    out.insert("tones".into(), Value::Array(tone_rows));

    let get = |n: &str| traces.iter().find(|(name, _)| name == n).map(|(_, t)| t);
    let (Some(s1), Some(s2)) = (get("s1"), get("s2")) else {
        return Ok(Value::Object(out));
    };

    let epsilon = match (spec.balance, spec.tone_frequency) {
        (true, Some(f)) => {
            let b = balance(s1, s2, f, DEFAULT_BALANCE_RANGE_DEG, DEFAULT_BALANCE_STEP_DEG)?;
            out.insert("balance".into(), serde_json::to_value(&b)?);
            b.epsilon_deg
        }
        (true, None) => return Err(Error::Config("analysis.balance needs tone_frequency".into())),
        (false, _) => spec.epsilon_deg,
    };
    out.insert("epsilon_deg".into(), json!(epsilon));
    let (s_t, s_b) = combine(s1, s2, epsilon)?;

    let spectra = [("magnetometry", &s_b), ("thermometry", &s_t)];
    for (label, t) in spectra {
        let s = welch(t, &spec.welch)?;
        let path = dir.join(format!("{label}_asd.csv"));
        write_spectrum_csv(&path, &s, &hash)?;
        report.output(&path);
    }

    let Some(f0) = spec.tone_frequency else {
        return Ok(Value::Object(out));
    };
    let iso = isolation_factor(&s_t, &s_b, f0)?;
    out.insert("isolation".into(), serde_json::to_value(iso)?);
    let hb = harmonic_table(&s_b, f0, spec.n_harmonics)?;
    let ht = harmonic_table(&s_t, f0, spec.n_harmonics)?;
    let path = dir.join("harmonics.csv");
    write_harmonics(&path, &hb, &ht, &hash)?;
    report.output(&path);
    out.insert("magnetometry_harmonics".into(), serde_json::to_value(&hb)?);
    out.insert("thermometry_harmonics".into(), serde_json::to_value(&ht)?);

    let field = match spec.applied_field_rms {
        Some(a) => Some(calibrate_field(&s_b, a, f0)?),
        None => None,
    };
    let temperature = match reference {
        Some(r) => Some(calibrate_temperature(&s_t, r)?),
        None => None,
    };
    if let Some(f) = &field {
        out.insert("field_calibration".into(), serde_json::to_value(f)?);
    }
    if let Some(t) = &temperature {
        out.insert("temperature_calibration".into(), serde_json::to_value(t)?);
    }
    if let (Some(f), Some(t)) = (&field, &temperature) {
        let cal = CalibrationResult::new(f, t)?;
        let harmonics: Vec<f64> = (1..=spec.n_harmonics).map(|n| f64::from(n) * f0).collect();
        let band = (spec.band[0], spec.band[1]);
        let mut floors = Map::new();
        for (label, t, ch) in [
            ("eta_b", &s_b, Channel::Magnetometry),
            ("eta_t", &s_t, Channel::Thermometry),
        ] {
            let s = welch(t, &spec.welch)?;
            floors.insert(label.into(), json!(sensitivity_floor(&s, band, &harmonics, &cal, ch)?));
        }
        out.insert("calibration".into(), serde_json::to_value(&cal)?);
        out.insert("sensitivity".into(), Value::Object(floors));
    }
    Ok(Value::Object(out))
}

pub fn write_harmonics(path: &Path, b: &HarmonicTable, t: &HarmonicTable, hash: &str) -> Result<()> {
    let rows: Vec<Vec<f64>> = b
        .entries
        .iter()
        .zip(&t.entries)
        .map(|(eb, et)| vec![f64::from(eb.n), eb.frequency, eb.rms, eb.snr_db, et.rms, et.snr_db])
        .collect();
    write_table_csv(
        path,
        &[
            "n",
            "frequency",
            "magnetometry_rms",
            "magnetometry_snr_db",
            "thermometry_rms",
            "thermometry_snr_db",
        ],
        &rows,
        hash,
    )
}
