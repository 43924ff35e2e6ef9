//! End-to-end experiment pipelines: calibration, noise floors, the burst
//! and test-tone experiments, harmonic parity, and the closed-form table.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lineshape::{
    harmonic_coefficient, mod_depth_for_slope, odmr_lines, shot_noise_sensitivity, volume_normalized_sensitivity,
    ChannelResponse, ShotNoiseSensitivity,
};
use crate::multiplex::{
    calibrate_field, calibrate_temperature, combine, CalibrationResult, Channel, FieldCalibration,
    TemperatureCalibration,
};
use crate::signal::{
    run_dual_channel, ChannelDrive, DemodConfig, DriveConfig, ScenarioSignal, TemperatureSignal, Tone,
    DEFAULT_RAW_RATE,
};
use crate::spectral::{
    fit_tone_detrended, harmonic_table, isolation_factor, mismatch_harmonic_study, sensitivity_floor, welch,
    HarmonicStudySetup, HarmonicTable, IsolationReport, MismatchRow, Spectrum, WelchConfig,
};
use crate::spin::{
    invert_misalignment, predict_isolation, Branch, IsolationPrediction, Misalignment, NvSystem, PhysicalConstants,
    TransitionLabel,
};
use crate::trace::{TimeTrace, Unit};

/// Bias field, static off-axis field and modulation depth of the reference
/// experiment.
pub const REFERENCE_B0: f64 = 1.6e-3;
pub const REFERENCE_BX: f64 = 8.37e-6;
pub const REFERENCE_MOD_DEPTH: f64 = 0.55e6;
pub const REFERENCE_PHOTOCURRENT: f64 = 10e-3;
pub const REFERENCE_REFERENCES: (f64, f64) = (5e3, 7e3);
pub const MEASURED_XI: f64 = 2511.0;
pub const TEST_TONE_HZ: f64 = 10.0;
/// Ratio of off-axis to on-axis test-field components of the coil.
pub const TEST_DBX_RATIO: f64 = 1.414;

/// Everything fixed across the runs of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setup {
    pub sys: NvSystem,
    pub consts: PhysicalConstants,
    pub drive: DriveConfig,
    pub demod: DemodConfig,
    pub raw_rate: f64,
}

/// Lock-in outputs and their ε = `epsilon_deg` combinations.
#[derive(Debug, Clone, PartialEq)]
pub struct DualOutput {
    pub s1: TimeTrace,
    pub s2: TimeTrace,
    pub s_t: TimeTrace,
    pub s_b: TimeTrace,
    pub epsilon_deg: f64,
}

impl Setup {
    /// Reference geometry: 1.6 mT bias, 8.37 µT static off-axis field,
    /// 1 MHz / 1 % lines, (−, m_I=−1) at 5 kHz and (+, m_I=+1) at 7 kHz,
    /// single-pole 1 ms lock-in at 1 kS/s output.
    pub fn reference(mod_depth: f64) -> Result<Self> {
        let mut sys = NvSystem::typical(REFERENCE_B0);
        sys.bx = REFERENCE_BX;
        let consts = PhysicalConstants::default();
        let demod = DemodConfig::default();
        let target1 = TransitionLabel::new(Branch::Minus, -1)?;
        let target2 = TransitionLabel::new(Branch::Plus, 1)?;
        let drive = DriveConfig::new(
            ChannelDrive::on_line(&sys, &consts, target1, REFERENCE_REFERENCES.0, mod_depth),
            ChannelDrive::on_line(&sys, &consts, target2, REFERENCE_REFERENCES.1, mod_depth),
            &demod,
        )?;
        Ok(Self {
            sys,
            consts,
            drive,
            demod,
            raw_rate: DEFAULT_RAW_RATE,
        })
    }

    /// Reference geometry with the modulation depth chosen so each channel's
    /// zero-crossing slope equals contrast / linewidth.
    pub fn slope_matched() -> Result<Self> {
        let mut s = Self::reference(REFERENCE_MOD_DEPTH)?;
        let depth = s.slope_matched_depth()?;
        for ch in s.drive.channels.iter_mut() {
            ch.mod_depth = depth;
        }
        Ok(s)
    }

    pub fn channel_response(&self, channel: usize) -> ChannelResponse {
        let ch = &self.drive.channels[channel];
        ChannelResponse::new(&odmr_lines(&self.sys, &self.consts), ch.center, ch.mod_depth, ch.power_scale)
    }

    pub fn slope_matched_depth(&self) -> Result<f64> {
        let lp = &self.sys.lineshape;
        mod_depth_for_slope(&self.channel_response(0), lp.contrast / lp.linewidth, 4.0 * lp.linewidth)
    }

    pub fn validate(&self) -> Result<()> {
        self.sys.validate()?;
        self.consts.validate()?;
        self.demod.validate()?;
        self.drive.validate()?;
        self.drive.check_separation(&self.demod)?;
        self.demod.decimation(self.raw_rate).map(|_| ())
    }

    pub fn run(&self, scen: &ScenarioSignal, epsilon_deg: f64) -> Result<DualOutput> {
        let (s1, s2) = run_dual_channel(&self.sys, &self.consts, &self.drive, scen, &self.demod, self.raw_rate)?;
        let (s_t, s_b) = combine(&s1, &s2, epsilon_deg)?;
        Ok(DualOutput {
            s1,
            s2,
            s_t,
            s_b,
            epsilon_deg,
        })
    }

    /// |H| of lock-in filter and output decimator at a baseband frequency.
    pub fn output_response(&self, f: f64) -> f64 {
        let m = self.demod.decimation(self.raw_rate).unwrap_or(1) as f64;
        let x = std::f64::consts::PI * f / self.raw_rate;
        let cic = if x == 0.0 { 1.0 } else { ((m * x).sin() / (m * x.sin())).powi(3) };
        self.demod.transfer_magnitude(f) * cic.abs()
    }
}

/// Calibration runs: a field tone for S_B and a temperature ramp for S_T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPlan {
    pub field_rms: f64,
    pub field_frequency: f64,
    pub field_duration: f64,
    /// Ramp from −span/2 to +span/2 over `ramp_duration`, K.
    pub ramp_span: f64,
    pub ramp_duration: f64,
}

impl Default for CalibrationPlan {
    fn default() -> Self {
        Self {
            field_rms: 1e-6,
            field_frequency: TEST_TONE_HZ,
            field_duration: 2.0,
            ramp_span: 20e-3,
            ramp_duration: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub result: CalibrationResult,
    pub field: FieldCalibration,
    pub temperature: TemperatureCalibration,
}

/// Noise-free calibration of both combined outputs at ε.
pub fn calibrate(setup: &Setup, plan: &CalibrationPlan, epsilon_deg: f64) -> Result<Calibration> {
    let mut field_scen = ScenarioSignal::quiet(plan.field_duration);
    field_scen.dbz.push(Tone::new(plan.field_frequency, plan.field_rms));
    let mut ramp_scen = ScenarioSignal::quiet(plan.ramp_duration);
    ramp_scen.temperature = TemperatureSignal {
        offset: -0.5 * plan.ramp_span,
        ramp_rate: plan.ramp_span / plan.ramp_duration,
        tones: Vec::new(),
    };
    let (field_run, ramp_run) = rayon::join(|| setup.run(&field_scen, epsilon_deg), || setup.run(&ramp_scen, epsilon_deg));
    let field = calibrate_field(&field_run?.s_b, plan.field_rms, plan.field_frequency)?;
    let ramp_run = ramp_run?;
    let reference = TimeTrace::new(
        ramp_run.s_t.times().map(|t| ramp_scen.dt_at(t)).collect(),
        ramp_run.s_t.sample_rate,
        Unit::Kelvin,
        ramp_run.s_t.start_time,
    )?;
    let temperature = calibrate_temperature(&ramp_run.s_t, &reference)?;
    Ok(Calibration {
        result: CalibrationResult::new(&field, &temperature)?,
        field,
        temperature,
    })
}

/// Analysis band for noise floors, Hz.
pub const FLOOR_BAND: (f64, f64) = (2.0, 40.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFloorReport {
    pub eta_b: f64,
    pub eta_t: f64,
    pub predicted: ShotNoiseSensitivity,
    pub eta_b_ratio: f64,
    pub eta_t_ratio: f64,
    pub mod_depth: f64,
    pub calibration: Calibration,
    pub magnetometry: Spectrum,
    pub thermometry: Spectrum,
}

/// Shot-noise-only run: calibrated Welch spectra of S_B and S_T and their
/// median floors over [`FLOOR_BAND`].
pub fn noise_floor(setup: &Setup, duration: f64, photocurrent: f64, seed: u64) -> Result<NoiseFloorReport> {
    let calibration = calibrate(setup, &CalibrationPlan::default(), 0.0)?;
    let mut scen = ScenarioSignal::quiet(duration);
    scen.shot_noise = true;
    scen.photocurrent = photocurrent;
    scen.seed = seed;
    let out = setup.run(&scen, 0.0)?;
    let welch_cfg = WelchConfig::default();
    let cal = &calibration.result;
    let magnetometry = welch(&cal.apply(&out.s_b, Channel::Magnetometry), &welch_cfg)?;
    let thermometry = welch(&cal.apply(&out.s_t, Channel::Thermometry), &welch_cfg)?;
    let unit_cal = CalibrationResult {
        field_scale: 1.0,
        temp_scale: 1.0,
        ..cal.clone()
    };
    let eta_b = sensitivity_floor(&magnetometry, FLOOR_BAND, &[], &unit_cal, Channel::Magnetometry)?;
    let eta_t = sensitivity_floor(&thermometry, FLOOR_BAND, &[], &unit_cal, Channel::Thermometry)?;
    let lp = &setup.sys.lineshape;
    let predicted = shot_noise_sensitivity(lp.linewidth, lp.contrast, photocurrent, &setup.consts)?;
    Ok(NoiseFloorReport {
        eta_b,
        eta_t,
        eta_b_ratio: eta_b / predicted.eta_b,
        eta_t_ratio: eta_t / predicted.eta_t,
        predicted,
        mod_depth: setup.drive.channels[0].mod_depth,
        calibration,
        magnetometry,
        thermometry,
    })
}

/// The burst experiment: a short field burst with a slow temperature drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig3Params {
    pub duration: f64,
    pub burst_rms: f64,
    pub burst_frequency: f64,
    pub burst_start: f64,
    pub burst_length: f64,
    /// Off-axis component of the burst relative to the on-axis one.
    pub dbx_ratio: f64,
    pub temperature_ramp: f64,
    pub photocurrent: f64,
    pub shot_noise: bool,
    pub seed: u64,
    /// Lower end of the accepted isolation band.
    pub xi_lower: f64,
}

impl Default for Fig3Params {
    fn default() -> Self {
        Self {
            duration: 10.0,
            burst_rms: 38.9e-9,
            burst_frequency: TEST_TONE_HZ,
            burst_start: 4.0,
            burst_length: 3.0,
            dbx_ratio: TEST_DBX_RATIO,
            temperature_ramp: 1e-3,
            photocurrent: REFERENCE_PHOTOCURRENT,
            shot_noise: true,
            seed: 3,
            xi_lower: 0.8 * MEASURED_XI,
        }
    }
}

impl Fig3Params {
    pub fn scenario(&self) -> ScenarioSignal {
        let stop = self.burst_start + self.burst_length;
        let mut s = ScenarioSignal::quiet(self.duration);
        s.dbz
            .push(Tone::new(self.burst_frequency, self.burst_rms).gated(self.burst_start, stop));
        if self.dbx_ratio != 0.0 {
            s.dbx.push(
                Tone::new(self.burst_frequency, self.dbx_ratio * self.burst_rms).gated(self.burst_start, stop),
            );
        }
        s.temperature.ramp_rate = self.temperature_ramp;
        s.photocurrent = self.photocurrent;
        s.shot_noise = self.shot_noise;
        s.seed = self.seed;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Report {
    /// Fitted burst in the calibrated magnetometry output, T RMS.
    pub burst_fitted_rms: f64,
    pub burst_applied_rms: f64,
    pub burst_relative_error: f64,
    /// Burst-frequency content of S_T inside the burst, output units.
    pub thermometry_leak_rms: f64,
    /// Same, outside the burst.
    pub thermometry_quiet_rms: f64,
    pub magnetometry_rms_units: f64,
    /// S_B/ξ_lower plus three standard deviations of the fit noise.
    pub leak_bound: f64,
    pub burst_within_5_percent: bool,
    pub leak_within_bound: bool,
    pub calibration: Calibration,
    #[serde(skip)]
    pub output: Option<DualOutput>,
}

pub fn fig3(setup: &Setup, p: &Fig3Params) -> Result<Fig3Report> {
    let calibration = calibrate(setup, &CalibrationPlan::default(), 0.0)?;
    let out = setup.run(&p.scenario(), 0.0)?;
    let stop = p.burst_start + p.burst_length;
    let b = fit_tone_detrended(&out.s_b.window(p.burst_start, stop), p.burst_frequency)?;
    let t = fit_tone_detrended(&out.s_t.window(p.burst_start, stop), p.burst_frequency)?;
    let quiet = fit_tone_detrended(&out.s_t.window(0.5, p.burst_start - 0.5), p.burst_frequency)?;
    let fitted = b.rms * calibration.result.field_scale;
    let noise_rms = |f: &crate::spectral::ToneFit| if f.snr > 0.0 { f.rms / f.snr.sqrt() } else { f.residual_rms };
    let bound = b.rms / p.xi_lower + 3.0 * noise_rms(&t);
    let rel = fitted / p.burst_rms - 1.0;
    Ok(Fig3Report {
        burst_fitted_rms: fitted,
        burst_applied_rms: p.burst_rms,
        burst_relative_error: rel,
        thermometry_leak_rms: t.rms,
        thermometry_quiet_rms: quiet.rms,
        magnetometry_rms_units: b.rms,
        leak_bound: bound,
        burst_within_5_percent: rel.abs() < 0.05,
        leak_within_bound: t.rms <= bound,
        calibration,
        output: Some(out),
    })
}

/// Test-tone experiment at the reference geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig4Params {
    pub duration: f64,
    pub dbz_rms: f64,
    pub dbx_rms: f64,
    pub frequency: f64,
    pub photocurrent: f64,
    pub shot_noise: bool,
    pub seed: u64,
    pub n_harmonics: u32,
}

impl Default for Fig4Params {
    fn default() -> Self {
        Self {
            duration: 10.0,
            dbz_rms: 1e-6,
            dbx_rms: TEST_DBX_RATIO * 1e-6,
            frequency: TEST_TONE_HZ,
            photocurrent: REFERENCE_PHOTOCURRENT,
            shot_noise: true,
            seed: 4,
            n_harmonics: 6,
        }
    }
}

impl Fig4Params {
    pub fn scenario(&self) -> ScenarioSignal {
        let mut s = ScenarioSignal::quiet(self.duration);
        s.dbz.push(Tone::new(self.frequency, self.dbz_rms));
        if self.dbx_rms != 0.0 {
            s.dbx.push(Tone::new(self.frequency, self.dbx_rms));
        }
        s.photocurrent = self.photocurrent;
        s.shot_noise = self.shot_noise;
        s.seed = self.seed;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig4Report {
    pub isolation: IsolationReport,
    pub predicted: IsolationPrediction,
    /// measured / predicted − 1
    pub xi_relative_error: f64,
    pub magnetometry_harmonics: HarmonicTable,
    pub thermometry_harmonics: HarmonicTable,
    pub eta_b: f64,
    pub eta_t: f64,
    pub calibration: Calibration,
    pub magnetometry: Spectrum,
    pub thermometry: Spectrum,
}

pub fn fig4(setup: &Setup, p: &Fig4Params) -> Result<Fig4Report> {
    let out = setup.run(&p.scenario(), 0.0)?;
    let isolation = isolation_factor(&out.s_t, &out.s_b, p.frequency)?;
    let predicted = predict_isolation(&setup.sys, &setup.consts, p.dbz_rms, p.dbx_rms)?;
    let field = calibrate_field(&out.s_b, p.dbz_rms, p.frequency)?;
    let ramp = calibrate(setup, &CalibrationPlan::default(), 0.0)?;
    let result = CalibrationResult::new(&field, &ramp.temperature)?;
    let calibration = Calibration {
        result,
        field,
        temperature: ramp.temperature,
    };
    let cal = &calibration.result;
    let welch_cfg = WelchConfig::default();
    let magnetometry = welch(&cal.apply(&out.s_b, Channel::Magnetometry), &welch_cfg)?;
    let thermometry = welch(&cal.apply(&out.s_t, Channel::Thermometry), &welch_cfg)?;
    let harmonics: Vec<f64> = (1..=p.n_harmonics.max(4)).map(|n| f64::from(n) * p.frequency).collect();
    let unit = CalibrationResult {
        field_scale: 1.0,
        temp_scale: 1.0,
        ..cal.clone()
    };
    let eta_b = sensitivity_floor(&magnetometry, FLOOR_BAND, &harmonics, &unit, Channel::Magnetometry)?;
    let eta_t = sensitivity_floor(&thermometry, FLOOR_BAND, &harmonics, &unit, Channel::Thermometry)?;
    Ok(Fig4Report {
        xi_relative_error: isolation.xi_ratio / predicted.ratio - 1.0,
        isolation,
        predicted,
        magnetometry_harmonics: harmonic_table(&out.s_b, p.frequency, p.n_harmonics)?,
        thermometry_harmonics: harmonic_table(&out.s_t, p.frequency, p.n_harmonics)?,
        eta_b,
        eta_t,
        calibration,
        magnetometry,
        thermometry,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityRow {
    pub n: u32,
    pub magnetometry_rms: f64,
    pub magnetometry_oracle_rms: f64,
    pub thermometry_rms: f64,
    pub thermometry_oracle_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicsReport {
    pub drive_rms: f64,
    pub frequency: f64,
    pub rows: Vec<ParityRow>,
    /// 10·log10(even power / odd power) in S_B.
    pub magnetometry_even_to_odd_db: f64,
    /// 10·log10(odd power / even power) in S_T.
    pub thermometry_odd_to_even_db: f64,
    /// Largest |measured/oracle| deviation in dB over harmonics the oracle
    /// puts above `oracle_floor` of the fundamental.
    pub max_oracle_deviation_db: f64,
    pub mismatch: Vec<MismatchRow>,
}

/// Relative level below which oracle harmonics are not compared.
pub const ORACLE_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicsParams {
    /// Peak frequency excursion of the test field as a fraction of the
    /// linewidth.
    pub excursion_fraction: f64,
    pub frequency: f64,
    pub duration: f64,
    pub n_max: u32,
    pub mismatches: Vec<f64>,
}

impl Default for HarmonicsParams {
    fn default() -> Self {
        Self {
            excursion_fraction: 0.1,
            frequency: TEST_TONE_HZ,
            duration: 4.0,
            n_max: 6,
            mismatches: vec![0.0, 0.01, 0.02, 0.05],
        }
    }
}

/// Harmonic parity of S_B and S_T for a large balanced field tone, the
/// Fourier-series oracle, and the slope-mismatch sweep.
///
/// The oracle expands R(x) ∓ R(−x) for x = a·sin(ωt), R being the
/// quasi-static channel response, and applies the output filter response
/// at each harmonic.
pub fn harmonics_study(setup: &Setup, p: &HarmonicsParams) -> Result<HarmonicsReport> {
    let gamma = setup.consts.gamma_over_2pi;
    let peak_hz = p.excursion_fraction * setup.sys.lineshape.linewidth;
    let drive_rms = peak_hz / gamma / SQRT_2;
    let mut scen = ScenarioSignal::quiet(p.duration);
    scen.dbz.push(Tone::new(p.frequency, drive_rms));
    let out = setup.run(&scen, 0.0)?;
    let hb = harmonic_table(&out.s_b, p.frequency, p.n_max)?;
    let ht = harmonic_table(&out.s_t, p.frequency, p.n_max)?;

    // channel 1 sees detuning +γΔBz, channel 2 sees −γΔBz
    let r1 = setup.channel_response(0);
    let r2 = setup.channel_response(1);
    let diff = |x: f64| r1.response(x) - r2.response(-x);
    let sum = |x: f64| r1.response(x) + r2.response(-x);
    let oracle = |g: &dyn Fn(f64) -> f64, n: u32| {
        harmonic_coefficient(&g, 0.0, peak_hz, n).abs() / SQRT_2 * setup.output_response(f64::from(n) * p.frequency)
    };
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let fund_b = oracle(&diff, 1);
    let fund_t = oracle(&sum, 2).max(f64::MIN_POSITIVE);
    for n in 1..=p.n_max {
        let (ob, ot) = (oracle(&diff, n), oracle(&sum, n));
        let (mb, mt) = (hb.get(n).map_or(0.0, |e| e.rms), ht.get(n).map_or(0.0, |e| e.rms));
        if ob > ORACLE_FLOOR * fund_b {
            worst = worst.max((20.0 * (mb / ob).log10()).abs());
        }
        if ot > ORACLE_FLOOR * fund_b && ot > ORACLE_FLOOR * fund_t {
            worst = worst.max((20.0 * (mt / ot).log10()).abs());
        }
        rows.push(ParityRow {
            n,
            magnetometry_rms: mb,
            magnetometry_oracle_rms: ob,
            thermometry_rms: mt,
            thermometry_oracle_rms: ot,
        });
    }
    let ratio_db = |num: f64, den: f64| 10.0 * (num.max(f64::MIN_POSITIVE) / den).log10();

    let study = HarmonicStudySetup {
        sys: setup.sys.clone(),
        consts: setup.consts,
        drive: setup.drive.clone(),
        demod: setup.demod,
        raw_rate: setup.raw_rate,
        duration: p.duration,
        tone_frequency: p.frequency,
        n_max: p.n_max.max(2),
        shot_noise: false,
        photocurrent: REFERENCE_PHOTOCURRENT,
        seed: 0,
    };
    let mismatch = mismatch_harmonic_study(&study, &p.mismatches, drive_rms)?;
    Ok(HarmonicsReport {
        drive_rms,
        frequency: p.frequency,
        rows,
        magnetometry_even_to_odd_db: ratio_db(hb.parity_power(false), hb.parity_power(true)),
        thermometry_odd_to_even_db: ratio_db(ht.parity_power(true), ht.parity_power(false)),
        max_oracle_deviation_db: worst,
        mismatch,
    })
}

/// Whether each row's 2nd harmonic exceeds the previous row's.
pub fn strictly_increasing(rows: &[MismatchRow]) -> bool {
    rows.windows(2)
        .all(|w| w[1].second_harmonic_rms > w[0].second_harmonic_rms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub linewidth: f64,
    pub contrast: f64,
    pub photocurrent: f64,
    pub shot_noise: ShotNoiseSensitivity,
    /// Measured 70 pT/√Hz normalized by √(6·10⁷ µm³), T·µm^{3/2}/√Hz.
    pub volume_normalized: f64,
    pub predicted_isolation: IsolationPrediction,
    /// Off-axis field implied by the measured ξ = 2511.
    pub inverted_misalignment: Misalignment,
}

pub const MEASURED_ETA_B: f64 = 70e-12;
pub const SENSING_VOLUME_UM3: f64 = 6e7;

/// Closed-form numbers for the reference parameters.
pub fn sensitivity_table(linewidth: f64, contrast: f64, photocurrent: f64) -> Result<SensitivityTable> {
    let consts = PhysicalConstants::default();
    let mut sys = NvSystem::typical(REFERENCE_B0);
    sys.bx = REFERENCE_BX;
    let dbz = 1e-6;
    let dbx = TEST_DBX_RATIO * dbz;
    Ok(SensitivityTable {
        linewidth,
        contrast,
        photocurrent,
        shot_noise: shot_noise_sensitivity(linewidth, contrast, photocurrent, &consts)?,
        volume_normalized: volume_normalized_sensitivity(MEASURED_ETA_B, SENSING_VOLUME_UM3)?,
        predicted_isolation: predict_isolation(&sys, &consts, dbz, dbx)?,
        inverted_misalignment: invert_misalignment(MEASURED_XI, sys.d0, sys.b0, &consts, dbz, dbx)?,
    })
}

/// Checks that a report value is finite, for pipeline outputs that feed
/// pass/fail summaries.
pub fn finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Data(format!("{name} is not finite")))
    }
}
