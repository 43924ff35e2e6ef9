use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tone::harmonic_table;
use crate::error::{ensure_positive, Error, Result};
use crate::multiplex::combine;
use crate::signal::{run_dual_channel, DemodConfig, DriveConfig, ScenarioSignal, Tone};
use crate::spin::{NvSystem, PhysicalConstants};

/// Fixed parts of a harmonic-parity simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicStudySetup {
    pub sys: NvSystem,
    pub consts: PhysicalConstants,
    pub drive: DriveConfig,
    pub demod: DemodConfig,
    pub raw_rate: f64,
    pub duration: f64,
    pub tone_frequency: f64,
    pub n_max: u32,
    pub shot_noise: bool,
    pub photocurrent: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchRow {
    /// Fractional slope excess of channel 2 over channel 1.
    pub mismatch: f64,
    pub fundamental_rms: f64,
    pub second_harmonic_rms: f64,
    /// 20·log10(second / fundamental).
    pub second_harmonic_dbc: f64,
    pub second_harmonic_snr_db: f64,
}

/// 2nd-harmonic content of the magnetometry output (ε = 0) as the slope
/// mismatch between channels grows, for a dBz test tone of `drive_rms`.
pub fn mismatch_harmonic_study(
    setup: &HarmonicStudySetup,
    mismatches: &[f64],
    drive_rms: f64,
) -> Result<Vec<MismatchRow>> {
    ensure_positive("drive_rms", drive_rms)?;
    if let Some(bad) = mismatches.iter().find(|m| !(0.0..=0.1).contains(*m)) {
        return Err(Error::param("mismatch", format!("{bad} outside [0, 0.1]")));
    }
    mismatches
        .par_iter()
        .map(|&delta| {
            let mut drive = setup.drive.clone();
            drive.channels[1].power_scale *= 1.0 + delta;
            let mut scen = ScenarioSignal::quiet(setup.duration);
            scen.dbz.push(Tone::new(setup.tone_frequency, drive_rms));
            scen.shot_noise = setup.shot_noise;
            scen.photocurrent = setup.photocurrent;
            scen.seed = setup.seed;
            let (s1, s2) = run_dual_channel(&setup.sys, &setup.consts, &drive, &scen, &setup.demod, setup.raw_rate)?;
            let (_, s_b) = combine(&s1, &s2, 0.0)?;
            let table = harmonic_table(&s_b, setup.tone_frequency, setup.n_max.max(2))?;
            let h1 = table.get(1).expect("n_max >= 2");
            let h2 = table.get(2).expect("n_max >= 2");
            Ok(MismatchRow {
                mismatch: delta,
                fundamental_rms: h1.rms,
                second_harmonic_rms: h2.rms,
                second_harmonic_dbc: 20.0 * (h2.rms / h1.rms).log10(),
                second_harmonic_snr_db: h2.snr_db,
            })
        })
        .collect()
}
