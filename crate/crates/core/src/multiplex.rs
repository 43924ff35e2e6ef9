//! Sum/difference combination of the two lock-in outputs with the ε
//! rotation, ε balancing against a test tone, and unit calibration.
//!
//! With the sign conventions of [`crate::signal`], S1 = −α·Δf₋ and
//! S2 = −α·Δf₊, so the combination S_T (sum) carries temperature and S_B
//! (difference) carries the on-axis field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::spectral::{fit_tone, ToneFit, DETECTION_SNR_DB};
use crate::trace::{TimeTrace, Unit};

pub const DEFAULT_BALANCE_RANGE_DEG: f64 = 1.5;
pub const DEFAULT_BALANCE_STEP_DEG: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Magnetometry,
    Thermometry,
}

/// Rotation weights (√2·cos(π/4+ε), √2·sin(π/4+ε)) for ε in degrees.
pub fn rotation_weights(epsilon_deg: f64) -> (f64, f64) {
    let th = std::f64::consts::FRAC_PI_4 + epsilon_deg.to_radians();
    (std::f64::consts::SQRT_2 * th.cos(), std::f64::consts::SQRT_2 * th.sin())
}

/// S_T = √2[cos(π/4+ε)·S1 + sin(π/4+ε)·S2],
/// S_B = √2[cos(π/4+ε)·S1 − sin(π/4+ε)·S2].
pub fn combine(s1: &TimeTrace, s2: &TimeTrace, epsilon_deg: f64) -> Result<(TimeTrace, TimeTrace)> {
    s1.ensure_aligned(s2)?;
    if !epsilon_deg.is_finite() {
        return Err(Error::param("epsilon", "must be finite"));
    }
    let (c, s) = rotation_weights(epsilon_deg);
    let make = |sign: f64| TimeTrace {
        samples: s1
            .samples
            .iter()
            .zip(&s2.samples)
            .map(|(a, b)| c * a + sign * s * b)
            .collect(),
        sample_rate: s1.sample_rate,
        unit: s1.unit,
        start_time: s1.start_time,
    };
    Ok((make(1.0), make(-1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceResult {
    pub epsilon_deg: f64,
    /// Test-tone leakage into S_T relative to the tone in S_B, 20·log10.
    pub residual_leakage_db: f64,
    pub residual_leakage_rms: f64,
    pub magnetometry_rms: f64,
    pub tone_frequency: f64,
    /// (ε in degrees, leakage dB) for every grid point.
    pub scan: Vec<(f64, f64)>,
    /// True when the minimum sits on the edge of the scanned range.
    pub at_range_edge: bool,
}

/// Finds ε minimizing the test tone in S_T.
///
/// Both channels are fitted once at `tone_freq`; since the least-squares
/// fit is linear in the data, the S_T and S_B tone phasors at any ε are the
/// same rotation of those two phasors. A grid scan over ±`range_deg` at
/// `step_deg` is refined by a parabola through the minimum and its
/// neighbours of the leakage power.
pub fn balance(
    s1: &TimeTrace,
    s2: &TimeTrace,
    tone_freq: f64,
    range_deg: f64,
    step_deg: f64,
) -> Result<BalanceResult> {
    s1.ensure_aligned(s2)?;
    ensure_positive("range", range_deg)?;
    ensure_positive("step", step_deg)?;
    if step_deg > range_deg {
        return Err(Error::param("step", "must not exceed the range"));
    }
    let (f1, f2) = rayon::join(|| fit_tone(s1, tone_freq), || fit_tone(s2, tone_freq));
    let (f1, f2) = (f1?, f2?);
    let (_, s_b0) = combine(s1, s2, 0.0)?;
    let b0 = fit_tone(&s_b0, tone_freq)?;
    if !b0.detected() {
        return Err(Error::CalibrationSignalMissing {
            frequency: tone_freq,
            snr_db: b0.snr_db(),
            threshold_db: DETECTION_SNR_DB,
        });
    }
    let phasor = |f: &ToneFit| (f.cos_coef, f.sin_coef);
    let (p1, p2) = (phasor(&f1), phasor(&f2));
    let rotated = |eps: f64, sign: f64| {
        let (c, s) = rotation_weights(eps);
        let re = c * p1.0 + sign * s * p2.0;
        let im = c * p1.1 + sign * s * p2.1;
        re * re + im * im
    };
    let leak_power = |eps: f64| rotated(eps, 1.0);
    let db = |eps: f64| 10.0 * (leak_power(eps) / rotated(eps, -1.0)).log10();

    let half = (range_deg / step_deg).round() as i64;
    let grid: Vec<f64> = (-half..=half).map(|k| k as f64 * step_deg).collect();
    let powers: Vec<f64> = grid.par_iter().map(|&e| leak_power(e)).collect();
    let (imin, _) = powers
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");
    let at_edge = imin == 0 || imin == grid.len() - 1;
    let mut eps = grid[imin];
    if !at_edge {
        let (ym, y0, yp) = (powers[imin - 1], powers[imin], powers[imin + 1]);
        let denom = ym - 2.0 * y0 + yp;
        if denom > 0.0 {
            let shift = 0.5 * (ym - yp) / denom;
            eps += shift.clamp(-1.0, 1.0) * step_deg;
        }
    } else {
        log::warn!("balance minimum at the edge of ±{range_deg}°; mismatch may exceed the scan range");
    }
    let residual = (leak_power(eps) / 2.0).sqrt();
    Ok(BalanceResult {
        epsilon_deg: eps,
        residual_leakage_db: db(eps),
        residual_leakage_rms: residual,
        magnetometry_rms: (rotated(eps, -1.0) / 2.0).sqrt(),
        tone_frequency: tone_freq,
        scan: grid.iter().map(|&e| (e, db(e))).collect(),
        at_range_edge: at_edge,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldCalibration {
    /// Tesla per output unit.
    pub field_scale: f64,
    pub applied_rms: f64,
    pub fitted_rms: f64,
    pub tone_frequency: f64,
    pub snr_db: f64,
    /// Fit residual RMS relative to the fitted tone RMS.
    pub residual_relative: f64,
}

/// Tesla-per-unit scale from a known test tone in S_B.
pub fn calibrate_field(s_b: &TimeTrace, applied_rms: f64, tone_freq: f64) -> Result<FieldCalibration> {
    ensure_positive("applied", applied_rms)?;
    let fit = fit_tone(s_b, tone_freq)?;
    if !fit.detected() {
        return Err(Error::CalibrationSignalMissing {
            frequency: tone_freq,
            snr_db: fit.snr_db(),
            threshold_db: DETECTION_SNR_DB,
        });
    }
    Ok(FieldCalibration {
        field_scale: applied_rms / fit.rms,
        applied_rms,
        fitted_rms: fit.rms,
        tone_frequency: tone_freq,
        snr_db: fit.snr_db(),
        residual_relative: fit.residual_rms / fit.rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureCalibration {
    /// Kelvin per output unit.
    pub temp_scale: f64,
    /// Reference temperature at zero output, K.
    pub intercept: f64,
    pub r_squared: f64,
    /// Residual RMS relative to the reference standard deviation.
    pub residual_relative: f64,
    pub samples: usize,
}

/// Smallest reference standard deviation accepted, K.
pub const MIN_REFERENCE_STD: f64 = 1e-9;

/// Kelvin-per-unit scale from S_T against a co-recorded temperature.
///
/// The reference is regressed on S_T, so white noise on the reference
/// sensor does not bias the slope. A reference on a different time base is
/// linearly interpolated onto S_T's.
pub fn calibrate_temperature(s_t: &TimeTrace, reference: &TimeTrace) -> Result<TemperatureCalibration> {
    if reference.unit != Unit::Kelvin {
        return Err(Error::UnitMismatch {
            expected: Unit::Kelvin.to_string(),
            found: reference.unit.to_string(),
        });
    }
    let aligned = reference.len() == s_t.len()
        && (reference.sample_rate - s_t.sample_rate).abs() <= 1e-9 * s_t.sample_rate
        && (reference.start_time - s_t.start_time).abs() <= 1e-6 / s_t.sample_rate;
    let reference = if aligned {
        reference.clone()
    } else {
        reference.resample_to(s_t)?
    };
    let n = s_t.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    let ref_std = reference.variance().sqrt();
    if ref_std < MIN_REFERENCE_STD {
        return Err(Error::InsufficientExcitation(format!(
            "reference temperature std {ref_std:.3e} K is below {MIN_REFERENCE_STD:.0e} K"
        )));
    }
    let (mx, my) = (s_t.mean(), reference.mean());
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in s_t.samples.iter().zip(&reference.samples) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::InsufficientExcitation("thermometry output is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(0.0);
    Ok(TemperatureCalibration {
        temp_scale: slope,
        intercept,
        r_squared: 1.0 - ss_res / syy,
        residual_relative: (ss_res / syy).sqrt(),
        samples: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Tesla per S_B unit.
    pub field_scale: f64,
    /// Kelvin per S_T unit.
    pub temp_scale: f64,
    pub field_residual_relative: f64,
    pub temp_residual_relative: f64,
    pub temp_r_squared: f64,
    pub method: String,
}

impl CalibrationResult {
    pub fn new(field: &FieldCalibration, temp: &TemperatureCalibration) -> Result<Self> {
        for (name, v) in [("field_scale", field.field_scale), ("temp_scale", temp.temp_scale)] {
            if !(v.is_finite() && v != 0.0) {
                return Err(Error::param(name, format!("must be finite and nonzero, got {v}")));
            }
        }
        Ok(Self {
            field_scale: field.field_scale,
            temp_scale: temp.temp_scale,
            field_residual_relative: field.residual_relative,
            temp_residual_relative: temp.residual_relative,
            temp_r_squared: temp.r_squared,
            method: format!(
                "field: least-squares tone fit at {} Hz, {:.3e} T RMS applied; temperature: reference-on-output regression over {} samples",
                field.tone_frequency, field.applied_rms, temp.samples
            ),
        })
    }

    pub fn scale(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Magnetometry => self.field_scale,
            Channel::Thermometry => self.temp_scale,
        }
    }

    /// Converts a combined output into physical units.
    pub fn apply(&self, trace: &TimeTrace, channel: Channel) -> TimeTrace {
        let unit = match channel {
            Channel::Magnetometry => Unit::Tesla,
            Channel::Thermometry => Unit::Kelvin,
        };
        trace.scaled(self.scale(channel)).with_unit(unit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::TAU;

    fn tr(n: usize, f: impl Fn(f64) -> f64) -> TimeTrace {
        TimeTrace::from_fn(n, 1e3, Unit::Dimensionless, f)
    }

    #[test]
    fn zero_epsilon_is_plain_sum_and_difference() {
        let a = tr(100, |t| t.sin() + 0.3);
        let b = tr(100, |t| (3.0 * t).cos());
        let (st, sb) = combine(&a, &b, 0.0).unwrap();
        for i in 0..100 {
            assert!((st.samples[i] - (a.samples[i] + b.samples[i])).abs() < 1e-15);
            assert!((sb.samples[i] - (a.samples[i] - b.samples[i])).abs() < 1e-15);
        }
        let (_, sb) = combine(&a, &a, 0.0).unwrap();
        assert!(sb.samples.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn mismatched_traces_rejected() {
        assert!(combine(&tr(10, |_| 0.0), &tr(11, |_| 0.0), 0.0).is_err());
    }

    fn mismatched_pair(delta: f64, n: usize) -> (TimeTrace, TimeTrace) {
        let a = 1e-3;
        (
            tr(n, |t| a * (TAU * 10.0 * t).sin()),
            tr(n, |t| -a * (1.0 + delta) * (TAU * 10.0 * t).sin()),
        )
    }

    fn closed_form(delta: f64) -> f64 {
        (1.0 / (1.0 + delta)).atan().to_degrees() - 45.0
    }

    #[test]
    fn two_percent_mismatch() {
        let (a, b) = mismatched_pair(0.02, 5000);
        let r = balance(&a, &b, 10.0, 1.5, 0.01).unwrap();
        assert!((closed_form(0.02) + 0.567).abs() < 1e-3);
        assert!((r.epsilon_deg - closed_form(0.02)).abs() < 0.01, "{}", r.epsilon_deg);
        assert!(r.residual_leakage_db < -60.0);
        assert_eq!(r.scan.len(), 301);
        let (st, _) = combine(&a, &b, r.epsilon_deg).unwrap();
        let leak = fit_tone(&st, 10.0).unwrap().rms;
        assert!(leak < 1e-3 * 1e-3);
    }

    #[test]
    fn five_percent_mismatch_inside_window() {
        let (a, b) = mismatched_pair(0.05, 5000);
        let r = balance(&a, &b, 10.0, 1.5, 0.01).unwrap();
        assert!((closed_form(0.05) + 1.397).abs() < 1e-3);
        assert!((r.epsilon_deg - closed_form(0.05)).abs() < 0.01);
        assert!(!r.at_range_edge);
    }

    #[test]
    fn balanced_channels_and_idempotence() {
        let (a, b) = mismatched_pair(0.0, 5000);
        let r = balance(&a, &b, 10.0, 1.5, 0.01).unwrap();
        assert!(r.epsilon_deg.abs() <= 0.01);
        // rebalancing the rotated pair gives ~0
        let (a, b) = mismatched_pair(0.03, 5000);
        let r = balance(&a, &b, 10.0, 1.5, 0.01).unwrap();
        let (w1, w2) = rotation_weights(r.epsilon_deg);
        let a2 = a.scaled(w1 / std::f64::consts::SQRT_2);
        let b2 = b.scaled(w2 / std::f64::consts::SQRT_2);
        let again = balance(&a2, &b2, 10.0, 1.5, 0.01).unwrap();
        assert!(again.epsilon_deg.abs() <= 0.01, "{}", again.epsilon_deg);
    }

    #[test]
    fn missing_tone_rejected() {
        let a = tr(5000, |_| 0.0);
        assert!(matches!(
            balance(&a, &a, 10.0, 1.5, 0.01),
            Err(Error::CalibrationSignalMissing { .. })
        ));
        assert!(matches!(
            calibrate_field(&a, 1e-6, 10.0),
            Err(Error::CalibrationSignalMissing { .. })
        ));
    }

    #[test]
    fn field_scale_round_trip() {
        let scale = 3.3e-3;
        let applied = 1e-6;
        let sb = tr(10_000, |t| applied / scale * std::f64::consts::SQRT_2 * (TAU * 10.0 * t).sin());
        let c = calibrate_field(&sb, applied, 10.0).unwrap();
        assert!((c.field_scale / scale - 1.0).abs() < 1e-9);
        let c2 = calibrate_field(&sb.scaled(2.0), 2.0 * applied, 10.0).unwrap();
        assert!((c2.fitted_rms / c.fitted_rms - 2.0).abs() < 1e-9);
        assert!((c2.field_scale / c.field_scale - 1.0).abs() < 1e-9);
    }

    fn kelvin(n: usize, f: impl Fn(f64) -> f64) -> TimeTrace {
        TimeTrace::from_fn(n, 1e3, Unit::Kelvin, f)
    }

    #[test]
    fn temperature_ramp_round_trip() {
        let scale = -2.5;
        let reference = kelvin(5000, |t| 0.01 * t);
        let st = tr(5000, |t| 0.01 * t / scale);
        let c = calibrate_temperature(&st, &reference).unwrap();
        assert!((c.temp_scale / scale - 1.0).abs() < 1e-9);
        assert!(c.r_squared > 0.999_999);
        assert!(calibrate_temperature(&st, &kelvin(5000, |_| 0.2)).is_err());
        assert!(calibrate_temperature(&st, &reference.clone().with_unit(Unit::Tesla)).is_err());
    }

    #[test]
    fn temperature_reference_on_other_time_base() {
        let reference = TimeTrace::from_fn(600, 100.0, Unit::Kelvin, |t| 0.02 * t);
        let st = tr(5000, |t| 4.0 * 0.02 * t);
        let c = calibrate_temperature(&st, &reference).unwrap();
        assert!((c.temp_scale - 0.25).abs() < 1e-9);
    }

    #[test]
    fn noisy_reference_slope_unbiased() {
        // 20 dB: reference noise variance is 1% of the signal variance
        let n = 2000;
        let st = tr(n, |t| (TAU * 0.5 * t).sin());
        let signal_std = st.variance().sqrt();
        let mut bias = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, 0.1 * signal_std).unwrap();
            let r = kelvin(n, |t| (TAU * 0.5 * t).sin());
            let r = TimeTrace {
                samples: r.samples.iter().map(|v| v + noise.sample(&mut rng)).collect(),
                ..r
            };
            bias += calibrate_temperature(&st, &r).unwrap().temp_scale - 1.0;
        }
        assert!((bias / 100.0).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn energy_identity(xs in proptest::collection::vec(-1e3f64..1e3, 2..50), k in -1e3f64..1e3) {
            let a = tr(xs.len(), |t| xs[(t * 1e3).round() as usize]);
            let b = tr(xs.len(), |t| k * xs[(t * 1e3).round() as usize].sin());
            let (st, sb) = combine(&a, &b, 0.0).unwrap();
            for i in 0..xs.len() {
                let lhs = st.samples[i].powi(2) + sb.samples[i].powi(2);
                let rhs = 2.0 * (a.samples[i].powi(2) + b.samples[i].powi(2));
                prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
            }
        }

        #[test]
        fn combine_is_linear(eps in -1.5f64..1.5, p in -5.0f64..5.0, q in -5.0f64..5.0) {
            let x1 = tr(32, |t| (7.0 * t).sin());
            let x2 = tr(32, |t| (3.0 * t).cos());
            let y1 = tr(32, |t| t * t);
            let y2 = tr(32, |t| 1.0 - t);
            let lin = |u: &TimeTrace, v: &TimeTrace| TimeTrace {
                samples: u.samples.iter().zip(&v.samples).map(|(a, b)| p * a + q * b).collect(),
                ..u.clone()
            };
            let (t_mix, b_mix) = combine(&lin(&x1, &y1), &lin(&x2, &y2), eps).unwrap();
            let (tx, bx) = combine(&x1, &x2, eps).unwrap();
            let (ty, by) = combine(&y1, &y2, eps).unwrap();
            for i in 0..32 {
                prop_assert!((t_mix.samples[i] - (p * tx.samples[i] + q * ty.samples[i])).abs() < 1e-12);
                prop_assert!((b_mix.samples[i] - (p * bx.samples[i] + q * by.samples[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn recovers_mismatch_angle(delta in 0.0f64..0.05) {
            let (a, b) = mismatched_pair(delta, 2000);
            let r = balance(&a, &b, 10.0, 1.5, 0.01).unwrap();
            prop_assert!((r.epsilon_deg - closed_form(delta)).abs() < 0.02);
        }
    }
}
