use super::config::{DemodConfig, DriveConfig};
use super::synth::{reference_cos, reference_sin};
use crate::error::{Error, Result};
use crate::trace::{TimeTrace, Unit};

/// In-phase and quadrature lock-in outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub x: TimeTrace,
    pub y: TimeTrace,
}

impl Demodulated {
    /// R = |X + iY|.
    pub fn magnitude(&self) -> Vec<f64> {
        self.x
            .samples
            .iter()
            .zip(&self.y.samples)
            .map(|(x, y)| x.hypot(*y))
            .collect()
    }
}

/// In-phase output X = LPF(2·V·cos(2π f_R t + φ_R)), decimated to the
/// output rate. A pure input A·cos(2π f_R t + φ_R) settles to A.
pub fn lockin_demodulate(raw: &TimeTrace, f_r: f64, phase: f64, cfg: &DemodConfig) -> Result<TimeTrace> {
    Ok(lockin_demodulate_iq(raw, f_r, phase, cfg)?.x)
}

/// X and Y = LPF(−2·V·sin(2π f_R t + φ_R)); an input A·cos(2π f_R t + φ_R + ψ)
/// settles to (A cos ψ, A sin ψ).
pub fn lockin_demodulate_iq(raw: &TimeTrace, f_r: f64, phase: f64, cfg: &DemodConfig) -> Result<Demodulated> {
    cfg.validate()?;
    let nyquist = raw.sample_rate / 2.0;
    if !(f_r > 0.0 && f_r < nyquist) {
        return Err(Error::Nyquist {
            frequency: f_r,
            limit: nyquist,
        });
    }
    if cfg.time_constant < 1.0 / (std::f64::consts::TAU * f_r) {
        log::warn!(
            "lock-in time constant {:.3e} s is shorter than 1/(2π·f_R) = {:.3e} s; 2f ripple will pass",
            cfg.time_constant,
            1.0 / (std::f64::consts::TAU * f_r)
        );
    }
    let m = cfg.decimation(raw.sample_rate)?;
    let (x, y) = rayon::join(
        || filter_stages(mix(raw, |t| 2.0 * reference_cos(f_r, phase, t)), raw.sample_rate, cfg),
        || filter_stages(mix(raw, |t| -2.0 * reference_sin(f_r, phase, t)), raw.sample_rate, cfg),
    );
    let (start, x) = decimate(&x, m, raw.start_time, raw.sample_rate);
    let (_, y) = decimate(&y, m, raw.start_time, raw.sample_rate);
    let rate = raw.sample_rate / m as f64;
    Ok(Demodulated {
        x: TimeTrace::new(x, rate, Unit::Dimensionless, start)?,
        y: TimeTrace::new(y, rate, Unit::Dimensionless, start)?,
    })
}

fn mix(raw: &TimeTrace, reference: impl Fn(f64) -> f64) -> Vec<f64> {
    raw.samples
        .iter()
        .enumerate()
        .map(|(i, v)| v * reference(raw.time(i)))
        .collect()
}

/// Cascade of discrete single-pole sections y += a·(x − y), a = 1 − e^{−dt/τ}.
fn filter_stages(mut v: Vec<f64>, rate: f64, cfg: &DemodConfig) -> Vec<f64> {
    let a = -(-1.0 / (rate * cfg.time_constant)).exp_m1();
    for _ in 0..cfg.order {
        let mut y = 0.0;
        for s in v.iter_mut() {
            y += a * (*s - y);
            *s = y;
        }
    }
    v
}

/// Third-order CIC (three cascaded length-M boxcars) followed by keeping
/// every M-th sample. Its nulls at multiples of the output rate remove the
/// 2f_R and cross-channel products before they alias. Returns the time of
/// the first output, compensated for the 1.5·(M−1) sample group delay.
fn decimate(v: &[f64], m: usize, start: f64, rate: f64) -> (f64, Vec<f64>) {
    let kernel = cic3_kernel(m);
    let delay = (3 * m - 2) / 2;
    let first_time = start + (delay as f64 - 1.5 * (m as f64 - 1.0)) / rate;
    if v.len() <= delay {
        return (first_time, Vec::new());
    }
    let count = (v.len() - 1 - delay) / m + 1;
    let out = (0..count)
        .map(|j| {
            let n = j * m + delay;
            kernel
                .iter()
                .enumerate()
                .take(n + 1)
                .map(|(l, k)| k * v[n - l])
                .sum()
        })
        .collect();
    (first_time, out)
}

fn cic3_kernel(m: usize) -> Vec<f64> {
    let boxcar = vec![1.0 / m as f64; m];
    let convolve = |a: &[f64], b: &[f64]| {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    };
    convolve(&convolve(&boxcar, &boxcar), &boxcar)
}

/// Predicted leakage of a unit tone at f_R2 through the f_R1 demodulator:
/// 20·log10 |H(j2π·Δf)| of the filter cascade.
pub fn predicted_crosstalk(drive: &DriveConfig, cfg: &DemodConfig) -> f64 {
    20.0 * cfg.transfer_magnitude(drive.reference_separation()).log10()
}

/// Measured leakage, dB: a unit tone at f_R2 demodulated at f_R1, output
/// magnitude |X + iY| relative to the matched case. Measured before output
/// decimation so only the lock-in filter is characterized.
pub fn channel_crosstalk(drive: &DriveConfig, cfg: &DemodConfig) -> Result<f64> {
    drive.validate()?;
    cfg.validate()?;
    let [c1, c2] = &drive.channels;
    let df = drive.reference_separation();
    let rate = (40.0 * drive.max_reference_frequency()).max(200e3);
    let settle = 20.0 * f64::from(cfg.order) * cfg.time_constant;
    let span = if df > 0.0 { (20.0 / df).max(0.05) } else { 0.05 };
    let n_settle = (settle * rate).ceil() as usize;
    let n = n_settle + (span * rate).ceil() as usize;
    let level = |f_tone: f64| {
        let t = |i: usize| i as f64 / rate;
        let tone: Vec<f64> = (0..n).map(|i| reference_cos(f_tone, c1.reference_phase, t(i))).collect();
        let mixed_x: Vec<f64> = tone
            .iter()
            .enumerate()
            .map(|(i, v)| 2.0 * v * reference_cos(c1.reference_frequency, c1.reference_phase, t(i)))
            .collect();
        let mixed_y: Vec<f64> = tone
            .iter()
            .enumerate()
            .map(|(i, v)| -2.0 * v * reference_sin(c1.reference_frequency, c1.reference_phase, t(i)))
            .collect();
        let x = filter_stages(mixed_x, rate, cfg);
        let y = filter_stages(mixed_y, rate, cfg);
        let ms = x[n_settle..]
            .iter()
            .zip(&y[n_settle..])
            .map(|(a, b)| a * a + b * b)
            .sum::<f64>()
            / (n - n_settle) as f64;
        ms.sqrt()
    };
    let (matched, cross) = rayon::join(|| level(c1.reference_frequency), || level(c2.reference_frequency));
    Ok(20.0 * (cross / matched).log10())
}
