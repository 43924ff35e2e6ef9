use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::{ChannelDrive, DriveConfig};
use super::scenario::ScenarioSignal;
use crate::error::{ensure_positive, Error, Result};
use crate::lineshape::{lorentzian, odmr_lines};
use crate::spin::{resonance_shift_with, Branch, NvSystem, PhysicalConstants};
use crate::trace::{TimeTrace, Unit};

pub const DEFAULT_RAW_RATE: f64 = 200e3;

/// Samples per RNG substream. Noise at absolute sample index k comes from
/// substream ⌊k / CHUNK⌋, so it does not depend on how the work is split.
const CHUNK: usize = 1 << 16;
const FLICKER_SEED_TAG: u64 = 0x6e76_6d75_7866_6c6b;

/// A line as seen from one drive tone: offset of the line from the tone
/// center, width, and contrast scaled by the tone's drive strength.
#[derive(Clone, Copy)]
struct SeenLine {
    offset: f64,
    fwhm: f64,
    weight: f64,
    branch: Branch,
}

struct ToneModel {
    lines: Vec<SeenLine>,
    reference_frequency: f64,
    phase: f64,
    depth: f64,
}

impl ToneModel {
    fn new(sys: &NvSystem, consts: &PhysicalConstants, ch: &ChannelDrive) -> Self {
        let lines = odmr_lines(sys, consts)
            .into_iter()
            .map(|l| SeenLine {
                offset: l.center - ch.center,
                fwhm: l.fwhm,
                weight: l.contrast * ch.power_scale,
                branch: l.label.branch,
            })
            .filter(|l| l.weight != 0.0)
            .collect();
        Self {
            lines,
            reference_frequency: ch.reference_frequency,
            phase: ch.reference_phase,
            depth: ch.mod_depth,
        }
    }

    #[inline]
    fn dip(&self, t: f64, shift_plus: f64, shift_minus: f64) -> f64 {
        let excursion = self.depth * reference_cos(self.reference_frequency, self.phase, t);
        self.lines
            .iter()
            .map(|l| {
                let shift = match l.branch {
                    Branch::Plus => shift_plus,
                    Branch::Minus => shift_minus,
                };
                l.weight * lorentzian(excursion - l.offset - shift, l.fwhm)
            })
            .sum()
    }
}

/// cos(2π f t + φ) with the cycle count reduced before the multiply by 2π.
#[inline]
pub(crate) fn reference_cos(f: f64, phase: f64, t: f64) -> f64 {
    let cycles = f * t;
    (std::f64::consts::TAU * (cycles - cycles.floor()) + phase).cos()
}

#[inline]
pub(crate) fn reference_sin(f: f64, phase: f64, t: f64) -> f64 {
    let cycles = f * t;
    (std::f64::consts::TAU * (cycles - cycles.floor()) + phase).sin()
}

/// Photodetector trace for the two-tone FM drive over [0, duration).
///
/// Each tone's instantaneous frequency is mapped through the static ODMR
/// spectrum (all six lines) shifted by the scenario's field and temperature
/// excursions; the two tones' dips add. Shot noise is white Gaussian with
/// one-sided density √(2e/i_ph); laser intensity noise multiplies the clean
/// fluorescence.
pub fn synthesize_raw(
    sys: &NvSystem,
    consts: &PhysicalConstants,
    drive: &DriveConfig,
    scen: &ScenarioSignal,
    raw_rate: f64,
) -> Result<TimeTrace> {
    let n = (scen.duration * raw_rate).round() as usize;
    synthesize_span(sys, consts, drive, scen, raw_rate, 0, n)
}

/// As [`synthesize_raw`] for samples k = first .. first+n at times k/raw_rate.
pub(crate) fn synthesize_span(
    sys: &NvSystem,
    consts: &PhysicalConstants,
    drive: &DriveConfig,
    scen: &ScenarioSignal,
    raw_rate: f64,
    first: i64,
    n: usize,
) -> Result<TimeTrace> {
    ensure_positive("raw_rate", raw_rate)?;
    sys.validate()?;
    consts.validate()?;
    drive.validate()?;
    scen.validate(raw_rate)?;
    let limit = raw_rate / 20.0;
    let f_max = drive.max_reference_frequency();
    if f_max > limit {
        return Err(Error::Nyquist {
            frequency: f_max,
            limit,
        });
    }

    let tones: Vec<ToneModel> = drive
        .channels
        .iter()
        .map(|ch| ToneModel::new(sys, consts, ch))
        .collect();
    let dbz_noise = scen
        .dbz_flicker
        .map(|f| f.realize(n, raw_rate, scen.seed ^ FLICKER_SEED_TAG, 0));
    let rin_noise = scen
        .rin_flicker
        .map(|f| f.realize(n, raw_rate, scen.seed ^ FLICKER_SEED_TAG, 1));

    let half_band = (raw_rate / 2.0).sqrt();
    let shot_sigma = if scen.shot_noise {
        scen.shot_noise_density(consts.electron_charge) * half_band
    } else {
        0.0
    };
    let mw_on = drive.channels.iter().any(|c| c.power_scale > 0.0);
    let excess = if mw_on { scen.mw_excess_noise } else { 0.0 };
    let additive_sigma = shot_sigma.hypot(excess * half_band);
    let rin_sigma = scen.rin_white * half_band;

    let mut samples = vec![0.0; n];
    // split at absolute chunk boundaries so each block maps to one substream
    let mut blocks: Vec<(i64, &mut [f64])> = Vec::new();
    let mut rest = samples.as_mut_slice();
    let mut k = first;
    while !rest.is_empty() {
        let to_boundary = CHUNK - k.rem_euclid(CHUNK as i64) as usize;
        let (head, tail) = rest.split_at_mut(to_boundary.min(rest.len()));
        let len = head.len();
        blocks.push((k, head));
        k += len as i64;
        rest = tail;
    }

    blocks.into_par_iter().for_each(|(k0, block)| {
        let mut rng = ChaCha8Rng::seed_from_u64(scen.seed);
        rng.set_stream(k0.div_euclid(CHUNK as i64) as u64);
        // keep the draw sequence aligned with absolute sample positions
        let skip = k0.rem_euclid(CHUNK as i64) as usize;
        for _ in 0..skip {
            let _: f64 = StandardNormal.sample(&mut rng);
            let _: f64 = StandardNormal.sample(&mut rng);
        }
        for (j, out) in block.iter_mut().enumerate() {
            let k = k0 + j as i64;
            let idx = (k - first) as usize;
            let t = k as f64 / raw_rate;
            let mut dbz = scen.dbz_at(t);
            if let Some(v) = &dbz_noise {
                dbz += v[idx];
            }
            let shift = resonance_shift_with(
                sys.shift_model,
                sys,
                consts,
                scen.dt_at(t),
                dbz,
                scen.dbx_at(t),
            );
            let clean = 1.0 - tones.iter().map(|m| m.dip(t, shift.plus, shift.minus)).sum::<f64>();
            let a: f64 = StandardNormal.sample(&mut rng);
            let r: f64 = StandardNormal.sample(&mut rng);
            let mut rin = rin_sigma * r;
            if let Some(v) = &rin_noise {
                rin += v[idx];
            }
            *out = clean * (1.0 + rin) + additive_sigma * a;
        }
    });

    TimeTrace::new(
        samples,
        raw_rate,
        Unit::NormalizedFluorescence,
        first as f64 / raw_rate,
    )
}
