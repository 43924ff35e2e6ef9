use thiserror::Error;

use crate::spin::TransitionLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("off-axis field ratio {ratio:.3e} exceeds the second-order regime limit {limit}")]
    OffAxisOutOfRegime { ratio: f64, limit: f64 },

    #[error("transitions {0} and {1} form a V-configuration (coherent population trapping)")]
    CptPair(TransitionLabel, TransitionLabel),

    #[error("reference separation {separation} Hz does not exceed the demodulation bandwidth {bandwidth} Hz")]
    ChannelsNotSeparated { separation: f64, bandwidth: f64 },

    #[error("frequency {frequency} Hz violates the sampling limit {limit} Hz")]
    Nyquist { frequency: f64, limit: f64 },

    #[error("trace mismatch: {0}")]
    TraceMismatch(String),

    #[error("trace too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("calibration signal missing at {frequency} Hz (SNR {snr_db:.1} dB < {threshold_db} dB)")]
    CalibrationSignalMissing {
        frequency: f64,
        snr_db: f64,
        threshold_db: f64,
    },

    #[error("insufficient excitation: {0}")]
    InsufficientExcitation(String),

    #[error("empty analysis band [{lo}, {hi}] Hz")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("unit mismatch: expected {expected}, found {found}")]
    UnitMismatch { expected: String, found: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {value}")))
    }
}
