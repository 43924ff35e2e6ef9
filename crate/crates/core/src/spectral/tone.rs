use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TimeTrace;

/// Presence threshold for tones and harmonics, dB.
pub const DETECTION_SNR_DB: f64 = 6.0;

/// Least-squares fit of a·cos(2πft) + b·sin(2πft) plus an offset (and
/// optionally a linear trend), t being the trace's absolute sample times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneFit {
    pub frequency: f64,
    pub cos_coef: f64,
    pub sin_coef: f64,
    pub rms: f64,
    /// Tone power over the power a noise-only fit would attribute to the
    /// tone, given the residual variance.
    pub snr: f64,
    pub residual_rms: f64,
}

impl ToneFit {
    pub fn amplitude(&self) -> f64 {
        self.cos_coef.hypot(self.sin_coef)
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr.log10()
    }

    pub fn detected(&self) -> bool {
        self.snr_db() >= DETECTION_SNR_DB
    }

    /// Phase φ of the fit written as A·sin(2πft + φ).
    pub fn phase(&self) -> f64 {
        self.cos_coef.atan2(self.sin_coef)
    }
}

#[inline]
fn phase_at(f: f64, t: f64) -> f64 {
    let cycles = f * t;
    std::f64::consts::TAU * (cycles - cycles.floor())
}

/// Joint fit of [1, (t), cos(2πf_k t), sin(2πf_k t) ...] over the trace.
fn fit_tones(trace: &TimeTrace, freqs: &[f64], trend: bool) -> Result<Vec<ToneFit>> {
    let nyquist = trace.sample_rate / 2.0;
    for &f in freqs {
        if !(f > 0.0 && f < nyquist) {
            return Err(Error::Nyquist {
                frequency: f,
                limit: nyquist,
            });
        }
    }
    let base = if trend { 2 } else { 1 };
    let p = base + 2 * freqs.len();
    let n = trace.len();
    if n < p + 1 {
        return Err(Error::TooShort { needed: p + 1, got: n });
    }
    let t_mid = trace.time(0) + 0.5 * (n - 1) as f64 / trace.sample_rate;
    let row = |i: usize, out: &mut [f64]| {
        let t = trace.time(i);
        out[0] = 1.0;
        if trend {
            out[1] = t - t_mid;
        }
        for (k, &f) in freqs.iter().enumerate() {
            let ph = phase_at(f, t);
            out[base + 2 * k] = ph.cos();
            out[base + 1 + 2 * k] = ph.sin();
        }
    };
    let mut ata = DMatrix::<f64>::zeros(p, p);
    let mut atb = DVector::<f64>::zeros(p);
    let mut r = vec![0.0; p];
    for (i, &y) in trace.samples.iter().enumerate() {
        row(i, &mut r);
        for a in 0..p {
            atb[a] += r[a] * y;
            for b in a..p {
                ata[(a, b)] += r[a] * r[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            ata[(a, b)] = ata[(b, a)];
        }
    }
    let coef = ata
        .clone()
        .cholesky()
        .map(|c| c.solve(&atb))
        .or_else(|| ata.lu().solve(&atb))
        .ok_or_else(|| Error::InsufficientExcitation("singular tone-fit design".into()))?;

    let mut ss = 0.0;
    for (i, &y) in trace.samples.iter().enumerate() {
        row(i, &mut r);
        let model: f64 = r.iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
        ss += (y - model).powi(2);
    }
    let sigma2 = ss / (n - p) as f64;
    let noise_tone_power = (2.0 * sigma2 / n as f64).max(f64::MIN_POSITIVE);
    Ok(freqs
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let (a, b) = (coef[base + 2 * k], coef[base + 1 + 2 * k]);
            let rms = a.hypot(b) / std::f64::consts::SQRT_2;
            ToneFit {
                frequency: f,
                cos_coef: a,
                sin_coef: b,
                rms,
                snr: rms * rms / noise_tone_power,
                residual_rms: sigma2.sqrt(),
            }
        })
        .collect())
}

/// Single-frequency least-squares fit over the whole trace.
pub fn fit_tone(trace: &TimeTrace, f0: f64) -> Result<ToneFit> {
    Ok(fit_tones(trace, &[f0], false)?[0])
}

/// As [`fit_tone`] with a linear trend fitted alongside, for outputs that
/// drift (e.g. a temperature ramp under the test tone).
pub fn fit_tone_detrended(trace: &TimeTrace, f0: f64) -> Result<ToneFit> {
    Ok(fit_tones(trace, &[f0], true)?[0])
}

/// RMS amplitude of the component at `f0`.
pub fn tone_amplitude(trace: &TimeTrace, f0: f64) -> Result<f64> {
    Ok(fit_tone(trace, f0)?.rms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicEntry {
    pub n: u32,
    pub frequency: f64,
    pub rms: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTable {
    pub fundamental: f64,
    pub entries: Vec<HarmonicEntry>,
}

impl HarmonicTable {
    pub fn get(&self, n: u32) -> Option<&HarmonicEntry> {
        self.entries.iter().find(|e| e.n == n)
    }

    /// Total power of the odd (or even) harmonics.
    pub fn parity_power(&self, odd: bool) -> f64 {
        self.entries
            .iter()
            .filter(|e| (e.n % 2 == 1) == odd)
            .map(|e| e.rms * e.rms)
            .sum()
    }

    pub fn detected(&self) -> impl Iterator<Item = &HarmonicEntry> {
        self.entries.iter().filter(|e| e.snr_db >= DETECTION_SNR_DB)
    }
}

/// Amplitudes of harmonics 1..=n_max of `f0`, fitted jointly.
pub fn harmonic_table(trace: &TimeTrace, f0: f64, n_max: u32) -> Result<HarmonicTable> {
    if n_max == 0 {
        return Err(Error::param("n_max", "must be >= 1"));
    }
    let freqs: Vec<f64> = (1..=n_max).map(|n| f0 * f64::from(n)).collect();
    let fits = fit_tones(trace, &freqs, false)?;
    Ok(HarmonicTable {
        fundamental: f0,
        entries: fits
            .iter()
            .zip(1..)
            .map(|(f, n)| HarmonicEntry {
                n,
                frequency: f.frequency,
                rms: f.rms,
                snr_db: f.snr_db(),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsolationReport {
    pub frequency: f64,
    /// Magnetometry over thermometry tone amplitude; `inf` if the
    /// thermometry tone vanishes exactly.
    pub xi_ratio: f64,
    pub xi_db_power: f64,
    pub xi_db_amplitude: f64,
    pub magnetometry_rms: f64,
    pub thermometry_rms: f64,
    pub magnetometry_snr_db: f64,
    pub thermometry_snr_db: f64,
    pub infinite: bool,
}

/// Isolation factor at the test-tone frequency.
pub fn isolation_factor(s_t: &TimeTrace, s_b: &TimeTrace, f0: f64) -> Result<IsolationReport> {
    s_t.ensure_aligned(s_b)?;
    let b = fit_tone(s_b, f0)?;
    if !b.detected() {
        return Err(Error::CalibrationSignalMissing {
            frequency: f0,
            snr_db: b.snr_db(),
            threshold_db: DETECTION_SNR_DB,
        });
    }
    let t = fit_tone(s_t, f0)?;
    let xi = b.rms / t.rms;
    Ok(IsolationReport {
        frequency: f0,
        xi_ratio: xi,
        xi_db_power: 10.0 * xi.log10(),
        xi_db_amplitude: 20.0 * xi.log10(),
        magnetometry_rms: b.rms,
        thermometry_rms: t.rms,
        magnetometry_snr_db: b.snr_db(),
        thermometry_snr_db: t.snr_db(),
        infinite: xi.is_infinite(),
    })
}
