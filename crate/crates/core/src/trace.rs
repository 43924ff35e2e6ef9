use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    NormalizedFluorescence,
    Tesla,
    Kelvin,
    Dimensionless,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::NormalizedFluorescence => "normalized-fluorescence",
            Unit::Tesla => "tesla",
            Unit::Kelvin => "kelvin",
            Unit::Dimensionless => "dimensionless",
        })
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized-fluorescence" => Ok(Unit::NormalizedFluorescence),
            "tesla" => Ok(Unit::Tesla),
            "kelvin" => Ok(Unit::Kelvin),
            "dimensionless" => Ok(Unit::Dimensionless),
            other => Err(Error::Data(format!("unknown unit `{other}`"))),
        }
    }
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub unit: Unit,
    pub start_time: f64,
}

impl TimeTrace {
    pub fn new(samples: Vec<f64>, sample_rate: f64, unit: Unit, start_time: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::param("sample_rate", format!("must be > 0, got {sample_rate}")));
        }
        if !start_time.is_finite() {
            return Err(Error::param("start_time", "must be finite"));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::Data(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
            unit,
            start_time,
        })
    }

    pub fn from_fn(n: usize, sample_rate: f64, unit: Unit, f: impl Fn(f64) -> f64) -> Self {
        let samples = (0..n).map(|i| f(i as f64 / sample_rate)).collect();
        Self {
            samples,
            sample_rate,
            unit,
            start_time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn mean(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    pub fn rms(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.len() as f64).sqrt()
    }

    pub fn variance(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / self.len() as f64
    }

    /// Samples with time in [t0, t1).
    pub fn window(&self, t0: f64, t1: f64) -> TimeTrace {
        let half = 0.5 / self.sample_rate;
        let first = (0..self.len()).find(|&i| self.time(i) >= t0 - half).unwrap_or(self.len());
        let last = (first..self.len())
            .find(|&i| self.time(i) >= t1 - half)
            .unwrap_or(self.len());
        TimeTrace {
            samples: self.samples[first..last].to_vec(),
            sample_rate: self.sample_rate,
            unit: self.unit,
            start_time: self.time(first),
        }
    }

    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    pub fn scaled(&self, k: f64) -> TimeTrace {
        TimeTrace {
            samples: self.samples.iter().map(|x| k * x).collect(),
            ..self.clone()
        }
    }

    /// Linear interpolation onto another trace's time base; samples outside
    /// this trace's span are clamped to the end values.
    pub fn resample_to(&self, base: &TimeTrace) -> Result<TimeTrace> {
        if self.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: self.len(),
            });
        }
        let samples = base
            .times()
            .map(|t| {
                let x = (t - self.start_time) * self.sample_rate;
                if x <= 0.0 {
                    self.samples[0]
                } else if x >= (self.len() - 1) as f64 {
                    self.samples[self.len() - 1]
                } else {
                    let i = x.floor() as usize;
                    let frac = x - i as f64;
                    self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
                }
            })
            .collect();
        Ok(TimeTrace {
            samples,
            sample_rate: base.sample_rate,
            unit: self.unit,
            start_time: base.start_time,
        })
    }

    pub(crate) fn ensure_aligned(&self, other: &TimeTrace) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::TraceMismatch(format!(
                "lengths differ ({} vs {})",
                self.len(),
                other.len()
            )));
        }
        if (self.sample_rate - other.sample_rate).abs() > 1e-9 * self.sample_rate {
            return Err(Error::TraceMismatch(format!(
                "sample rates differ ({} vs {})",
                self.sample_rate, other.sample_rate
            )));
        }
        Ok(())
    }
}
