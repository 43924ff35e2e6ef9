use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Sinusoid x(t) = √2·rms·sin(2πf·t + φ), optionally gated to [start, stop).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tone {
    pub frequency: f64,
    pub rms: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
}

impl Tone {
    pub fn new(frequency: f64, rms: f64) -> Self {
        Self {
            frequency,
            rms,
            phase: 0.0,
            start: None,
            stop: None,
        }
    }

    pub fn gated(mut self, start: f64, stop: f64) -> Self {
        self.start = Some(start);
        self.stop = Some(stop);
        self
    }

    pub fn amplitude(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.rms
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if self.start.is_some_and(|s| t < s) || self.stop.is_some_and(|s| t >= s) {
            return 0.0;
        }
        let cycles = self.frequency * t;
        let phase = std::f64::consts::TAU * (cycles - cycles.floor()) + self.phase;
        self.amplitude() * phase.sin()
    }

    fn validate(&self) -> Result<()> {
        ensure_positive("tone.frequency", self.frequency)?;
        ensure_finite("tone.rms", self.rms)?;
        ensure_finite("tone.phase", self.phase)?;
        if let (Some(a), Some(b)) = (self.start, self.stop) {
            if b <= a {
                return Err(Error::param("tone.stop", "must be after start"));
            }
        }
        Ok(())
    }
}

/// Power-law noise with one-sided PSD density²·(1 Hz / max(f, f_min)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlickerNoise {
    /// Amplitude spectral density at 1 Hz, unit/√Hz.
    pub density_at_1hz: f64,
    /// Corner below which the spectrum is flat, Hz.
    pub f_min: f64,
}

impl FlickerNoise {
    fn validate(&self) -> Result<()> {
        ensure_finite("flicker.density_at_1hz", self.density_at_1hz)?;
        ensure_positive("flicker.f_min", self.f_min)
    }

    /// Shaped Gaussian realization of length `n` at `rate`, drawn from
    /// `stream` of the seeded generator.
    pub fn realize(&self, n: usize, rate: f64, seed: u64, stream: u64) -> Vec<f64> {
        if n == 0 || self.density_at_1hz == 0.0 {
            return vec![0.0; n];
        }
        let len = n.next_power_of_two().max(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut buf: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(len).process(&mut buf);
        // unit-variance white noise has one-sided PSD 2/rate
        buf[0] = Complex64::new(0.0, 0.0);
        for (k, c) in buf.iter_mut().enumerate().skip(1) {
            let f = k.min(len - k) as f64 * rate / len as f64;
            let psd = self.density_at_1hz.powi(2) / f.max(self.f_min);
            *c *= (psd * rate / 2.0).sqrt();
        }
        planner.plan_fft_inverse(len).process(&mut buf);
        buf.iter().take(n).map(|c| c.re / len as f64).collect()
    }
}

/// Slow temperature excursion ΔT(t) = offset + ramp_rate·t + Σ tones, K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TemperatureSignal {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub ramp_rate: f64,
    #[serde(default)]
    pub tones: Vec<Tone>,
}

impl TemperatureSignal {
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.offset + self.ramp_rate * t + self.tones.iter().map(|x| x.value(t)).sum::<f64>()
    }
}

/// Ground-truth inputs and noise settings for one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSignal {
    /// Simulated duration, s.
    pub duration: f64,
    /// On-axis field excursion ΔBz(t), T.
    #[serde(default)]
    pub dbz: Vec<Tone>,
    /// Off-axis field excursion ΔBx(t), T.
    #[serde(default)]
    pub dbx: Vec<Tone>,
    /// Ambient on-axis field noise, T/√Hz at 1 Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dbz_flicker: Option<FlickerNoise>,
    #[serde(default)]
    pub temperature: TemperatureSignal,
    /// Detected photocurrent, A.
    pub photocurrent: f64,
    pub shot_noise: bool,
    /// Residual white laser intensity noise, relative/√Hz.
    #[serde(default)]
    pub rin_white: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rin_flicker: Option<FlickerNoise>,
    /// Extra flat noise present while microwaves are on, relative/√Hz.
    #[serde(default)]
    pub mw_excess_noise: f64,
    pub seed: u64,
}

impl ScenarioSignal {
    /// Noise-free, signal-free scenario.
    pub fn quiet(duration: f64) -> Self {
        Self {
            duration,
            dbz: Vec::new(),
            dbx: Vec::new(),
            dbz_flicker: None,
            temperature: TemperatureSignal::default(),
            photocurrent: 10e-3,
            shot_noise: false,
            rin_white: 0.0,
            rin_flicker: None,
            mw_excess_noise: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self, raw_rate: f64) -> Result<()> {
        ensure_positive("duration", self.duration)?;
        ensure_positive("photocurrent", self.photocurrent)?;
        for (name, v) in [("rin_white", self.rin_white), ("mw_excess_noise", self.mw_excess_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, "must be >= 0"));
            }
        }
        let limit = raw_rate / 20.0;
        for t in self.dbz.iter().chain(&self.dbx).chain(&self.temperature.tones) {
            t.validate()?;
            if t.frequency >= limit {
                return Err(Error::Nyquist {
                    frequency: t.frequency,
                    limit,
                });
            }
        }
        ensure_finite("temperature.offset", self.temperature.offset)?;
        ensure_finite("temperature.ramp_rate", self.temperature.ramp_rate)?;
        for f in self.dbz_flicker.iter().chain(self.rin_flicker.iter()) {
            f.validate()?;
        }
        Ok(())
    }

    #[inline]
    pub fn dbz_at(&self, t: f64) -> f64 {
        self.dbz.iter().map(|x| x.value(t)).sum()
    }

    #[inline]
    pub fn dbx_at(&self, t: f64) -> f64 {
        self.dbx.iter().map(|x| x.value(t)).sum()
    }

    #[inline]
    pub fn dt_at(&self, t: f64) -> f64 {
        self.temperature.value(t)
    }

    /// One-sided relative shot-noise density √(2e/i_ph), 1/√Hz.
    pub fn shot_noise_density(&self, electron_charge: f64) -> f64 {
        (2.0 * electron_charge / self.photocurrent).sqrt()
    }
}
