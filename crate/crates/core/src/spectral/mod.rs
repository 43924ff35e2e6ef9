//! Noise spectra, tone and harmonic extraction, isolation factor,
//! sensitivity floors and the harmonic-parity study.

mod psd;
mod study;
mod tone;

pub use psd::{periodogram, psd, welch, Detrend, Spectrum, WelchConfig, Window};
pub use study::{mismatch_harmonic_study, HarmonicStudySetup, MismatchRow};
pub use tone::{
    fit_tone, fit_tone_detrended, harmonic_table, isolation_factor, tone_amplitude, HarmonicEntry, HarmonicTable, IsolationReport,
    ToneFit, DETECTION_SNR_DB,
};

use crate::error::Result;
use crate::multiplex::{CalibrationResult, Channel};

/// Median ASD over `band`, ignoring bins within three resolution bins of
/// the `exclude` tones, times the channel's calibration scale. Returns
/// T/√Hz or K/√Hz.
pub fn sensitivity_floor(
    spec: &Spectrum,
    band: (f64, f64),
    exclude: &[f64],
    cal: &CalibrationResult,
    channel: Channel,
) -> Result<f64> {
    let guard = 3.0 * spec.resolution();
    Ok(spec.median_asd(band.0, band.1, exclude, guard)? * cal.scale(channel).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::trace::{TimeTrace, Unit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cal(field: f64, temp: f64) -> CalibrationResult {
        CalibrationResult {
            field_scale: field,
            temp_scale: temp,
            field_residual_relative: 0.0,
            temp_residual_relative: 0.0,
            temp_r_squared: 1.0,
            method: String::new(),
        }
    }

    #[test]
    fn floor_recovers_white_density() {
        // output-unit noise of density d, scale k ⇒ k·d T/√Hz
        let d = 3e-6;
        let k = 7e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = Normal::new(0.0, d * (500.0f64).sqrt()).unwrap();
        let tr = TimeTrace::new((0..20_000).map(|_| g.sample(&mut rng)).collect(), 1e3, Unit::Dimensionless, 0.0)
            .unwrap();
        let s = welch(&tr, &WelchConfig::default()).unwrap();
        let floor = sensitivity_floor(&s, (2.0, 40.0), &[10.0], &cal(k, 1.0), Channel::Magnetometry).unwrap();
        assert!((floor / (k * d) - 1.0).abs() < 0.1, "{floor}");
        assert!(matches!(
            sensitivity_floor(&s, (600.0, 700.0), &[], &cal(k, 1.0), Channel::Thermometry),
            Err(Error::EmptyBand { .. })
        ));
    }
}
