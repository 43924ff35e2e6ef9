//! Acceptance checks. Each test prints one `ACCEPTANCE <n> PASS|FAIL` line.

use std::f64::consts::TAU;
use std::time::Instant;

use nvmux::lineshape::{shot_noise_sensitivity, volume_normalized_sensitivity};
use nvmux::multiplex::{balance, combine, DEFAULT_BALANCE_RANGE_DEG, DEFAULT_BALANCE_STEP_DEG};
use nvmux::pipeline::{
    fig3, fig4, harmonics_study, noise_floor, strictly_increasing, Fig3Params, Fig4Params, HarmonicsParams, Setup,
    REFERENCE_MOD_DEPTH, MEASURED_XI,
};
use nvmux::signal::{
    channel_crosstalk, lockin_demodulate_iq, predicted_crosstalk, ChannelDrive, DemodConfig, DriveConfig,
    ScenarioSignal, Tone,
};
use nvmux::spin::{
    cpt_dark_state, invert_misalignment, predict_isolation, Branch, NvSystem, PhysicalConstants, RabiPair,
    TransitionLabel,
};
use nvmux::{Error, TimeTrace, Unit};

fn report(n: u32, pass: bool, detail: String) {
    println!("ACCEPTANCE {n:>2} {}: {detail}", if pass { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_01_closed_form_sensitivity() {
    let consts = PhysicalConstants::default();
    let start = Instant::now();
    let s = shot_noise_sensitivity(1e6, 0.01, 10e-3, &consts).unwrap();
    let elapsed = start.elapsed();
    let b_ok = (s.eta_b / 20.2e-12 - 1.0).abs() < 0.02;
    let t_ok = (s.eta_t / 7.63e-6 - 1.0).abs() < 0.02;
    let fast = elapsed.as_secs_f64() < 1e-3;
    let pass = b_ok && t_ok && fast;
    report(
        1,
        pass,
        format!(
            "eta_B = {:.2} pT/rtHz, eta_T = {:.3} uK/rtHz, {:?}",
            s.eta_b * 1e12,
            s.eta_t * 1e6,
            elapsed
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_end_to_end_shot_noise_floor() {
    let setup = Setup::slope_matched().unwrap();
    let start = Instant::now();
    let r = noise_floor(&setup, 10.0, 10e-3, 2).unwrap();
    let elapsed = start.elapsed();
    let pass = (r.eta_b_ratio - 1.0).abs() < 0.15 && (r.eta_t_ratio - 1.0).abs() < 0.15 && elapsed.as_secs_f64() < 60.0;
    report(
        2,
        pass,
        format!(
            "depth {:.3} MHz: eta_B = {:.2} pT/rtHz ({:.3}x), eta_T = {:.3} uK/rtHz ({:.3}x), {:.1} s",
            r.mod_depth * 1e-6,
            r.eta_b * 1e12,
            r.eta_b_ratio,
            r.eta_t * 1e6,
            r.eta_t_ratio,
            elapsed.as_secs_f64()
        ),
    );
    // the reference modulation depth gives a shallower slope; informational
    let info = noise_floor(&Setup::reference(REFERENCE_MOD_DEPTH).unwrap(), 10.0, 10e-3, 2).unwrap();
    println!(
        "    info: depth 0.55 MHz gives eta_B {:.3}x and eta_T {:.3}x the closed form",
        info.eta_b_ratio, info.eta_t_ratio
    );
    assert!(pass);
}

#[test]
fn criterion_03_isolation_factor() {
    let setup = Setup::reference(REFERENCE_MOD_DEPTH).unwrap();
    let r = fig4(&setup, &Fig4Params::default()).unwrap();
    let xi = r.isolation.xi_ratio;
    let agrees = r.xi_relative_error.abs() < 0.10;
    let in_band = (xi / MEASURED_XI - 1.0).abs() < 0.20 && (r.predicted.ratio / MEASURED_XI - 1.0).abs() < 0.20;
    let pass = agrees && in_band;
    report(
        3,
        pass,
        format!(
            "measured xi = {xi:.0} ({:.1} dB power), predicted {:.0}, error {:+.2}%",
            r.isolation.xi_db_power,
            r.predicted.ratio,
            100.0 * r.xi_relative_error
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_misalignment_round_trip() {
    let consts = PhysicalConstants::default();
    let mut worst: f64 = 0.0;
    for bx in [1e-6, 5e-6, 8.37e-6, 20e-6] {
        let mut sys = NvSystem::typical(1.6e-3);
        sys.bx = bx;
        let xi = predict_isolation(&sys, &consts, 1e-6, 1.414e-6).unwrap().ratio;
        let m = invert_misalignment(xi, sys.d0, sys.b0, &consts, 1e-6, 1.414e-6).unwrap();
        worst = worst.max((m.bx / bx - 1.0).abs());
    }
    let pass = worst < 1e-12;
    report(4, pass, format!("worst relative error {worst:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_05_harmonic_parity() {
    let setup = Setup::reference(REFERENCE_MOD_DEPTH).unwrap();
    let p = HarmonicsParams {
        mismatches: vec![0.0],
        ..HarmonicsParams::default()
    };
    let r = harmonics_study(&setup, &p).unwrap();
    for row in &r.rows {
        println!(
            "    n={} S_B {:.3e} (oracle {:.3e})  S_T {:.3e} (oracle {:.3e})",
            row.n, row.magnetometry_rms, row.magnetometry_oracle_rms, row.thermometry_rms, row.thermometry_oracle_rms
        );
    }
    let pass = r.magnetometry_even_to_odd_db <= -30.0
        && r.thermometry_odd_to_even_db <= -30.0
        && r.max_oracle_deviation_db < 1.0;
    report(
        5,
        pass,
        format!(
            "S_B even/odd {:.1} dB, S_T odd/even {:.1} dB, oracle deviation {:.3} dB",
            r.magnetometry_even_to_odd_db, r.thermometry_odd_to_even_db, r.max_oracle_deviation_db
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_slope_mismatch_harmonic() {
    let setup = Setup::reference(REFERENCE_MOD_DEPTH).unwrap();
    let r = harmonics_study(&setup, &HarmonicsParams::default()).unwrap();
    let rows = &r.mismatch;
    let rise = 20.0 * (rows[3].second_harmonic_rms / rows[0].second_harmonic_rms.max(f64::MIN_POSITIVE)).log10();
    let pass = strictly_increasing(rows) && rise >= 20.0;
    for row in rows {
        println!(
            "    mismatch {:.0}%: 2nd harmonic {:.3e} ({:.1} dBc)",
            100.0 * row.mismatch,
            row.second_harmonic_rms,
            row.second_harmonic_dbc
        );
    }
    report(6, pass, format!("5% sits {rise:.1} dB above 0%"));
    assert!(pass);
}

#[test]
fn criterion_07_balancing() {
    let mut setup = Setup::reference(REFERENCE_MOD_DEPTH).unwrap();
    setup.sys.bx = 0.0;
    setup.drive.channels[1].power_scale = 1.02;
    let mut scen = ScenarioSignal::quiet(2.0);
    scen.dbz.push(Tone::new(10.0, 1e-6));
    let out = setup.run(&scen, 0.0).unwrap();
    let oracle = (1.0f64 / 1.02).atan().to_degrees() - 45.0;
    let b = balance(&out.s1, &out.s2, 10.0, DEFAULT_BALANCE_RANGE_DEG, DEFAULT_BALANCE_STEP_DEG).unwrap();
    // rebalance after applying ε: rotate S1, S2 by ε and search again
    let (st, sb) = combine(&out.s1, &out.s2, b.epsilon_deg).unwrap();
    let half = |t: &TimeTrace, u: &TimeTrace, sign: f64| {
        TimeTrace::new(
            t.samples.iter().zip(&u.samples).map(|(a, c)| 0.5 * (a + sign * c)).collect(),
            t.sample_rate,
            t.unit,
            t.start_time,
        )
        .unwrap()
    };
    let again = balance(&half(&st, &sb, 1.0), &half(&st, &sb, -1.0), 10.0, 1.5, 0.01).unwrap();
    let pass = (b.epsilon_deg - oracle).abs() < 0.01 && again.epsilon_deg.abs() <= DEFAULT_BALANCE_STEP_DEG;
    report(
        7,
        pass,
        format!(
            "eps = {:.4} deg (oracle {oracle:.4}), rebalanced {:+.4} deg",
            b.epsilon_deg, again.epsilon_deg
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_cpt() {
    let mut exact = true;
    for (op, om) in [(1.0, 1.0), (3.0, 4.0), (0.2, 5.0), (7.0, 0.0)] {
        let d = cpt_dark_state(RabiPair {
            omega_plus: op,
            omega_minus: om,
        })
        .unwrap();
        exact &= d.overlap_minus1_dark == op * op / (op * op + om * om);
    }
    let sys = NvSystem::typical(1.6e-3);
    let c = PhysicalConstants::default();
    let demod = DemodConfig::default();
    let chan = |b, m, f| ChannelDrive::on_line(&sys, &c, TransitionLabel::new(b, m).unwrap(), f, 0.55e6);
    let shared = DriveConfig::new(chan(Branch::Minus, 1, 5e3), chan(Branch::Plus, 1, 7e3), &demod);
    let cross = DriveConfig::new(chan(Branch::Minus, -1, 5e3), chan(Branch::Plus, 1, 7e3), &demod);
    let pass = exact && matches!(shared, Err(Error::CptPair(..))) && cross.is_ok();
    report(
        8,
        pass,
        format!("overlap exact: {exact}, shared-mI pair rejected, cross pair accepted: {}", cross.is_ok()),
    );
    assert!(pass);
}

#[test]
fn criterion_09_burst_reproduction() {
    let setup = Setup::reference(REFERENCE_MOD_DEPTH).unwrap();
    let r = fig3(&setup, &Fig3Params::default()).unwrap();
    let pass = r.burst_within_5_percent && r.leak_within_bound;
    report(
        9,
        pass,
        format!(
            "burst {:.2} nT ({:+.2}%), thermometry leak {:.3e} <= bound {:.3e}",
            r.burst_fitted_rms * 1e9,
            100.0 * r.burst_relative_error,
            r.thermometry_leak_rms,
            r.leak_bound
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_demodulation_oracle() {
    let cfg = DemodConfig::default();
    let (fr, rate) = (5e3, 200e3);
    let raw = TimeTrace::from_fn(20_000, rate, Unit::NormalizedFluorescence, |t| (TAU * fr * t).cos());
    let d = lockin_demodulate_iq(&raw, fr, 0.0, &cfg).unwrap();
    let at = |t: f64| ((t - d.x.start_time) * d.x.sample_rate).round() as usize;
    let settled = d.x.samples[at(5.0 * cfg.time_constant)];
    let tail = at(0.05)..d.x.len();
    let x_tail = d.x.samples[tail.clone()].iter().sum::<f64>() / tail.len() as f64;
    let y_tail = d.y.samples[tail].iter().map(|v| v.abs()).fold(0.0, f64::max);
    let rejection_db = 20.0 * (x_tail / y_tail.max(f64::MIN_POSITIVE)).log10();

    let sys = NvSystem::typical(1.6e-3);
    let c = PhysicalConstants::default();
    let drive = DriveConfig::new(
        ChannelDrive::on_line(&sys, &c, TransitionLabel::new(Branch::Minus, -1).unwrap(), 5e3, 0.55e6),
        ChannelDrive::on_line(&sys, &c, TransitionLabel::new(Branch::Plus, 1).unwrap(), 7e3, 0.55e6),
        &cfg,
    )
    .unwrap();
    let measured = channel_crosstalk(&drive, &cfg).unwrap();
    let predicted = predicted_crosstalk(&drive, &cfg);
    let pass = (settled - 1.0).abs() < 0.01 && rejection_db > 120.0 && (measured - predicted).abs() < 1.0;
    report(
        10,
        pass,
        format!(
            "X(5 tau) = {settled:.4}, quadrature rejection {rejection_db:.0} dB, crosstalk {measured:.2} dB vs {predicted:.2} dB"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_volume_normalization() {
    let v = volume_normalized_sensitivity(70e-12, 6e7).unwrap();
    let pass = (v / 542e-9 - 1.0).abs() < 0.005;
    report(11, pass, format!("{:.1} nT um^1.5/rtHz", v * 1e9));
    assert!(pass);
}
