use super::config::{DemodConfig, DriveConfig};
use super::lockin::lockin_demodulate;
use super::scenario::ScenarioSignal;
use super::synth::synthesize_span;
use crate::error::{Error, Result};
use crate::spin::{NvSystem, PhysicalConstants};
use crate::trace::TimeTrace;

/// Synthesizes the raw trace and demodulates it at both references.
///
/// The simulation starts early enough for the lock-in filters to settle and
/// the returned traces cover [0, duration) at the output rate. Channel 0
/// yields S1, channel 1 yields S2; a positive drive-minus-line detuning
/// gives a positive output.
pub fn run_dual_channel(
    sys: &NvSystem,
    consts: &PhysicalConstants,
    drive: &DriveConfig,
    scen: &ScenarioSignal,
    demod: &DemodConfig,
    raw_rate: f64,
) -> Result<(TimeTrace, TimeTrace)> {
    demod.validate()?;
    drive.validate()?;
    if !drive.is_multiplexed() {
        return Err(Error::param(
            "reference_frequency",
            "multiplexed operation needs distinct reference frequencies",
        ));
    }
    drive.check_separation(demod)?;
    let m = demod.decimation(raw_rate)?;
    let settle = (20.0 * f64::from(demod.order) * demod.time_constant).max(0.05);
    let pre_blocks = (settle * demod.output_rate).ceil() as usize;
    let n_out = (scen.duration * demod.output_rate).round() as usize;
    if n_out == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    // the decimator's last tap reaches 1.5·M samples past each output point
    let n_raw = (pre_blocks + n_out + 2) * m;
    let first = -((pre_blocks * m) as i64);
    let raw = synthesize_span(sys, consts, drive, scen, raw_rate, first, n_raw)?;

    let [c1, c2] = &drive.channels;
    let (s1, s2) = rayon::join(
        || lockin_demodulate(&raw, c1.reference_frequency, c1.reference_phase, demod),
        || lockin_demodulate(&raw, c2.reference_frequency, c2.reference_phase, demod),
    );
    let slice = |t: TimeTrace| -> Result<TimeTrace> {
        if t.len() < pre_blocks + n_out {
            return Err(Error::TooShort {
                needed: pre_blocks + n_out,
                got: t.len(),
            });
        }
        let start = t.time(pre_blocks);
        TimeTrace::new(t.samples[pre_blocks..pre_blocks + n_out].to_vec(), t.sample_rate, t.unit, start)
    };
    Ok((slice(s1?)?, slice(s2?)?))
}
