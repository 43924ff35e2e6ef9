use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::spin::{is_cpt_pair, line_frequency, NvSystem, PhysicalConstants, TransitionLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    #[default]
    Sinusoidal,
}

/// One frequency-modulated microwave tone and its lock-in reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDrive {
    pub target: TransitionLabel,
    /// Carrier center frequency, Hz.
    pub center: f64,
    /// Modulation/reference frequency f_R, Hz.
    pub reference_frequency: f64,
    /// Reference phase φ_R, rad.
    pub reference_phase: f64,
    /// Peak FM excursion, Hz.
    pub mod_depth: f64,
    #[serde(default)]
    pub waveform: Waveform,
    /// Relative drive strength; scales the contrast this tone sees. Slope
    /// mismatch between channels is expressed here.
    pub power_scale: f64,
}

impl ChannelDrive {
    /// Drive centered on the target line of `sys`.
    pub fn on_line(
        sys: &NvSystem,
        consts: &PhysicalConstants,
        target: TransitionLabel,
        reference_frequency: f64,
        mod_depth: f64,
    ) -> Self {
        Self {
            target,
            center: line_frequency(sys, consts, target),
            reference_frequency,
            reference_phase: 0.0,
            mod_depth,
            waveform: Waveform::Sinusoidal,
            power_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        TransitionLabel::new(self.target.branch, self.target.m_i)?;
        ensure_positive("center", self.center)?;
        ensure_positive("reference_frequency", self.reference_frequency)?;
        ensure_finite("reference_phase", self.reference_phase)?;
        ensure_positive("mod_depth", self.mod_depth)?;
        ensure_finite("power_scale", self.power_scale)?;
        if self.power_scale < 0.0 {
            return Err(Error::param("power_scale", "must be >= 0"));
        }
        Ok(())
    }
}

/// Two-tone FM drive. Channel 0 feeds S1, channel 1 feeds S2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub channels: [ChannelDrive; 2],
}

impl DriveConfig {
    /// Validates both channels, rejects V-configuration pairs and, when the
    /// reference frequencies differ, requires them to be separated by more
    /// than the lock-in bandwidth.
    pub fn new(first: ChannelDrive, second: ChannelDrive, demod: &DemodConfig) -> Result<Self> {
        demod.validate()?;
        let cfg = Self {
            channels: [first, second],
        };
        cfg.validate()?;
        if cfg.is_multiplexed() {
            cfg.check_separation(demod)?;
        }
        Ok(cfg)
    }

    /// Per-channel checks and the V-configuration exclusion.
    pub fn validate(&self) -> Result<()> {
        let [a, b] = &self.channels;
        a.validate()?;
        b.validate()?;
        if a.target == b.target {
            return Err(Error::param("drive", "both channels target the same line"));
        }
        if is_cpt_pair(a.target, b.target) {
            return Err(Error::CptPair(a.target, b.target));
        }
        Ok(())
    }

    pub fn check_separation(&self, demod: &DemodConfig) -> Result<()> {
        let separation = self.reference_separation();
        let bandwidth = demod.bandwidth();
        if separation <= bandwidth {
            return Err(Error::ChannelsNotSeparated {
                separation,
                bandwidth,
            });
        }
        Ok(())
    }

    pub fn reference_separation(&self) -> f64 {
        (self.channels[0].reference_frequency - self.channels[1].reference_frequency).abs()
    }

    pub fn is_multiplexed(&self) -> bool {
        self.reference_separation() > 0.0
    }

    pub fn max_reference_frequency(&self) -> f64 {
        self.channels[0]
            .reference_frequency
            .max(self.channels[1].reference_frequency)
    }
}

/// Lock-in low-pass and output decimation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemodConfig {
    /// Time constant of each single-pole stage, s.
    pub time_constant: f64,
    /// Number of cascaded single-pole stages (1 = 6 dB/oct).
    pub order: u32,
    /// Output sample rate, Hz.
    pub output_rate: f64,
}

impl Default for DemodConfig {
    fn default() -> Self {
        Self {
            time_constant: 1e-3,
            order: 1,
            output_rate: 1e3,
        }
    }
}

impl DemodConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("time_constant", self.time_constant)?;
        ensure_positive("output_rate", self.output_rate)?;
        if self.order == 0 || self.order > 8 {
            return Err(Error::param("order", format!("must be in 1..=8, got {}", self.order)));
        }
        Ok(())
    }

    /// −3 dB bandwidth of the cascade, Hz.
    pub fn bandwidth(&self) -> f64 {
        let n = f64::from(self.order);
        (2f64.powf(1.0 / n) - 1.0).sqrt() / (std::f64::consts::TAU * self.time_constant)
    }

    /// |H(f)| of the cascade.
    pub fn transfer_magnitude(&self, f: f64) -> f64 {
        let x = std::f64::consts::TAU * f * self.time_constant;
        (1.0 + x * x).powf(-0.5 * f64::from(self.order))
    }

    /// Integer decimation factor from `raw_rate` to the output rate.
    pub fn decimation(&self, raw_rate: f64) -> Result<usize> {
        if self.output_rate > raw_rate {
            return Err(Error::param(
                "output_rate",
                format!("{} Hz exceeds the raw rate {raw_rate} Hz", self.output_rate),
            ));
        }
        let ratio = raw_rate / self.output_rate;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * ratio {
            return Err(Error::param(
                "output_rate",
                format!("raw rate {raw_rate} Hz is not an integer multiple of {} Hz", self.output_rate),
            ));
        }
        Ok(m as usize)
    }
}
