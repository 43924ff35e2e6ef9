use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{TimeTrace, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    /// Periodic window of length n.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let w = |i: usize| {
            let x = std::f64::consts::TAU * i as f64 / n as f64;
            match self {
                Window::Hann => 0.5 - 0.5 * x.cos(),
                Window::Hamming => 0.54 - 0.46 * x.cos(),
                Window::Rectangular => 1.0,
            }
        };
        (0..n).map(w).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Detrend {
    None,
    #[default]
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WelchConfig {
    /// Samples per segment; derived from `segments` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment_length: Option<usize>,
    pub segments: usize,
    pub overlap: f64,
    pub window: Window,
    pub detrend: Detrend,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_length: None,
            segments: 8,
            overlap: 0.5,
            window: Window::Hann,
            detrend: Detrend::Mean,
        }
    }
}

/// One-sided amplitude spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    /// unit/√Hz
    pub asd: Vec<f64>,
    pub unit: Unit,
    pub window: Window,
    pub segment_length: usize,
    pub segments: usize,
    pub overlap: f64,
    /// Equivalent noise bandwidth of the window, Hz.
    pub enbw: f64,
}

impl Spectrum {
    pub fn resolution(&self) -> f64 {
        if self.frequencies.len() > 1 {
            self.frequencies[1] - self.frequencies[0]
        } else {
            0.0
        }
    }

    pub fn psd(&self) -> impl Iterator<Item = f64> + '_ {
        self.asd.iter().map(|a| a * a)
    }

    /// ∫ PSD df over all bins.
    pub fn total_power(&self) -> f64 {
        self.psd().sum::<f64>() * self.resolution()
    }

    /// ∫ PSD df over bins within `half_width` Hz of `f0`. For a tone of RMS
    /// A this returns A² whatever the window, provided the half width
    /// covers the window's main lobe.
    pub fn tone_power(&self, f0: f64, half_width: f64) -> f64 {
        self.frequencies
            .iter()
            .zip(self.psd())
            .filter(|(f, _)| (*f - f0).abs() <= half_width)
            .map(|(_, p)| p)
            .sum::<f64>()
            * self.resolution()
    }

    /// Median ASD over [lo, hi], skipping bins within `guard` Hz of any
    /// frequency in `exclude`.
    pub fn median_asd(&self, lo: f64, hi: f64, exclude: &[f64], guard: f64) -> Result<f64> {
        let mut v: Vec<f64> = self
            .frequencies
            .iter()
            .zip(&self.asd)
            .filter(|(f, _)| **f >= lo && **f <= hi && exclude.iter().all(|x| (*f - x).abs() > guard))
            .map(|(_, a)| *a)
            .collect();
        if v.is_empty() {
            return Err(Error::EmptyBand { lo, hi });
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        Ok(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
    }
}

/// Welch estimate; the segment length follows from the segment count
/// unless given explicitly.
pub fn welch(trace: &TimeTrace, cfg: &WelchConfig) -> Result<Spectrum> {
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::param("overlap", "must be in [0, 1)"));
    }
    let len = match cfg.segment_length {
        Some(l) => l,
        None => {
            if cfg.segments == 0 {
                return Err(Error::param("segments", "must be >= 1"));
            }
            let span = 1.0 + (cfg.segments as f64 - 1.0) * (1.0 - cfg.overlap);
            (trace.len() as f64 / span).floor() as usize
        }
    };
    psd_with(trace, len, cfg.overlap, cfg.window, cfg.detrend)
}

/// Welch-averaged one-sided ASD with per-segment mean removal. Density
/// scaling: PSD = 2·|FFT(w·x)|² / (fs·Σw²), DC and Nyquist bins not doubled.
pub fn psd(trace: &TimeTrace, segment_length: usize, overlap: f64, window: Window) -> Result<Spectrum> {
    psd_with(trace, segment_length, overlap, window, Detrend::Mean)
}

/// Single rectangular-window periodogram of the whole trace, no detrending.
pub fn periodogram(trace: &TimeTrace) -> Result<Spectrum> {
    psd_with(trace, trace.len(), 0.0, Window::Rectangular, Detrend::None)
}

fn psd_with(trace: &TimeTrace, len: usize, overlap: f64, window: Window, detrend: Detrend) -> Result<Spectrum> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::param("overlap", "must be in [0, 1)"));
    }
    if len < 2 || len > trace.len() {
        return Err(Error::TooShort {
            needed: len.max(2),
            got: trace.len(),
        });
    }
    let step = ((len as f64 * (1.0 - overlap)).round() as usize).max(1);
    let count = (trace.len() - len) / step + 1;
    let w = window.coefficients(len);
    let wss: f64 = w.iter().map(|x| x * x).sum();
    let ws: f64 = w.iter().sum();
    let fs = trace.sample_rate;
    let bins = len / 2 + 1;
    let fft = FftPlanner::new().plan_fft_forward(len);

    let acc = (0..count)
        .into_par_iter()
        .map(|k| {
            let seg = &trace.samples[k * step..k * step + len];
            let mean = match detrend {
                Detrend::Mean => seg.iter().sum::<f64>() / len as f64,
                Detrend::None => 0.0,
            };
            let mut buf: Vec<Complex64> = seg
                .iter()
                .zip(&w)
                .map(|(x, w)| Complex64::new((x - mean) * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf[..bins].iter().map(|c| c.norm_sqr()).collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        // summed in segment order so the result does not depend on scheduling
        .into_iter()
        .fold(vec![0.0; bins], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        });

    let asd = acc
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let one_sided = if i == 0 || (len.is_multiple_of(2) && i == len / 2) { 1.0 } else { 2.0 };
            (one_sided * p / (count as f64 * fs * wss)).sqrt()
        })
        .collect();
    Ok(Spectrum {
        frequencies: (0..bins).map(|i| i as f64 * fs / len as f64).collect(),
        asd,
        unit: trace.unit,
        window,
        segment_length: len,
        segments: count,
        overlap,
        enbw: fs * wss / (ws * ws),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::{SQRT_2, TAU};

    fn white(n: usize, rate: f64, density: f64, seed: u64) -> TimeTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, density * (rate / 2.0).sqrt()).unwrap();
        TimeTrace::new((0..n).map(|_| d.sample(&mut rng)).collect(), rate, Unit::Tesla, 0.0).unwrap()
    }

    #[test]
    fn white_noise_density_recovered() {
        let tr = white(400_000, 1e3, 2e-11, 1);
        // ~100 averages
        let s = psd(&tr, 8000, 0.5, Window::Hann).unwrap();
        assert!(s.segments >= 99);
        let mid = s.median_asd(100.0, 400.0, &[], 0.0).unwrap();
        assert!((mid / 2e-11 - 1.0).abs() < 0.1, "{mid}");
    }

    #[test]
    fn tone_power_window_independent() {
        let a = 0.3;
        let tr = TimeTrace::from_fn(100_000, 1e3, Unit::Dimensionless, |t| SQRT_2 * a * (TAU * 10.3 * t).sin());
        for w in [Window::Hann, Window::Hamming, Window::Rectangular] {
            let s = welch(&tr, &WelchConfig { window: w, ..WelchConfig::default() }).unwrap();
            let p = s.tone_power(10.3, if w == Window::Rectangular { 2.0 } else { 0.5 });
            assert!((p / (a * a) - 1.0).abs() < 0.02, "{w:?}: {p}");
        }
    }

    #[test]
    fn zero_trace_zero_spectrum() {
        let tr = TimeTrace::from_fn(4096, 1e3, Unit::Dimensionless, |_| 0.0);
        let s = welch(&tr, &WelchConfig::default()).unwrap();
        assert!(s.asd.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short_rejected() {
        let tr = TimeTrace::from_fn(1, 1e3, Unit::Dimensionless, |_| 0.0);
        assert!(welch(&tr, &WelchConfig::default()).is_err());
        let tr = TimeTrace::from_fn(100, 1e3, Unit::Dimensionless, |_| 0.0);
        assert!(psd(&tr, 200, 0.5, Window::Hann).is_err());
    }

    #[test]
    fn welch_power_matches_variance() {
        let tr = white(1_000_000, 1e3, 1.0, 9);
        let s = welch(&tr, &WelchConfig::default()).unwrap();
        assert!((s.total_power() / tr.variance() - 1.0).abs() < 5e-3);
    }

    #[test]
    fn periodogram_is_exact_parseval() {
        let tr = white(10_001, 1e3, 1.0, 4);
        let s = periodogram(&tr).unwrap();
        let ms = tr.samples.iter().map(|x| x * x).sum::<f64>() / tr.len() as f64;
        assert!((s.total_power() / ms - 1.0).abs() < 1e-10);
        let tr = white(10_000, 1e3, 1.0, 4);
        let s = periodogram(&tr).unwrap();
        let ms = tr.samples.iter().map(|x| x * x).sum::<f64>() / tr.len() as f64;
        assert!((s.total_power() / ms - 1.0).abs() < 1e-10);
    }

    #[test]
    fn empty_band_rejected() {
        let tr = white(10_000, 1e3, 1.0, 2);
        let s = welch(&tr, &WelchConfig::default()).unwrap();
        assert!(matches!(s.median_asd(600.0, 700.0, &[], 0.0), Err(Error::EmptyBand { .. })));
    }
}
