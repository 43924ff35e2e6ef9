//! Raw photodetector synthesis under two-tone FM drive and digital lock-in
//! demodulation at each reference frequency.

mod chain;
mod config;
mod lockin;
mod scenario;
mod synth;

pub use chain::run_dual_channel;
pub use config::{ChannelDrive, DemodConfig, DriveConfig, Waveform};
pub use lockin::{channel_crosstalk, lockin_demodulate, lockin_demodulate_iq, predicted_crosstalk, Demodulated};
pub use scenario::{FlickerNoise, ScenarioSignal, TemperatureSignal, Tone};
pub use synth::{synthesize_raw, DEFAULT_RAW_RATE};
