use nvmux::lineshape::{demod_response, odmr_spectrum, LineshapeParams};
use nvmux::spin::{
    cpt_dark_state, invert_misalignment, predict_isolation, resonance_shift_with, transition_frequencies, Branch,
    NvSystem, PhysicalConstants, RabiPair, ShiftModel,
};
use proptest::prelude::*;

fn centers(sys: &NvSystem, c: &PhysicalConstants) -> (f64, f64) {
    let lines = transition_frequencies(sys, c).unwrap();
    let mean = |b: Branch| {
        lines
            .iter()
            .filter(|(l, _)| l.branch == b)
            .map(|(_, f)| f)
            .sum::<f64>()
            / 3.0
    };
    (mean(Branch::Plus), mean(Branch::Minus))
}

proptest! {
    #[test]
    fn triplet_centers_without_hyperfine(b0 in 1e-4f64..0.05) {
        let c = PhysicalConstants::default();
        let mut sys = NvSystem::typical(b0);
        sys.azz = 0.0;
        let (fp, fm) = centers(&sys, &c);
        prop_assert!(((fp + fm) / 2.0 - sys.d0).abs() <= 1e-15 * sys.d0 * 4.0);
        let half = c.gamma_over_2pi * b0;
        prop_assert!(((fp - fm) / 2.0 - half).abs() <= 1e-15 * sys.d0 * 4.0);
    }

    #[test]
    fn sum_ignores_field_and_difference_ignores_temperature(
        dt in -1.0f64..1.0,
        dbz in -1e-5f64..1e-5,
        dbz2 in -1e-5f64..1e-5,
        dbx in -1e-6f64..1e-6,
        dt2 in -1.0f64..1.0,
    ) {
        let c = PhysicalConstants::default();
        let mut sys = NvSystem::typical(1.6e-3);
        sys.bx = 8.37e-6;
        for model in [ShiftModel::FirstOrder, ShiftModel::CrossTerm, ShiftModel::FullQuadratic] {
            let a = resonance_shift_with(model, &sys, &c, dt, dbz, dbx);
            let b = resonance_shift_with(model, &sys, &c, dt, dbz2, dbx);
            let scale = a.plus.abs().max(a.minus.abs()).max(1.0);
            prop_assert!(((a.plus + a.minus) - (b.plus + b.minus)).abs() < 1e-12 * scale);
            let d = resonance_shift_with(model, &sys, &c, dt2, dbz, 0.0);
            prop_assert!(((a.plus - a.minus) - (d.plus - d.minus)).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn dark_state_orthonormal_and_scale_free(op in 0.0f64..1e3, om in 1e-3f64..1e3, k in 1e-3f64..1e3) {
        let d = cpt_dark_state(RabiPair { omega_plus: op, omega_minus: om }).unwrap();
        let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
        prop_assert!((dot(d.bright, d.bright) - 1.0).abs() < 1e-12);
        prop_assert!((dot(d.dark, d.dark) - 1.0).abs() < 1e-12);
        prop_assert!(dot(d.bright, d.dark).abs() < 1e-12);
        let s = cpt_dark_state(RabiPair { omega_plus: k * op, omega_minus: k * om }).unwrap();
        prop_assert!((s.overlap_minus1_dark - d.overlap_minus1_dark).abs() < 1e-12);
    }

    #[test]
    fn misalignment_round_trip(bx in 1e-7f64..5e-5, dbz in 1e-8f64..1e-5, ratio in 0.1f64..10.0) {
        let c = PhysicalConstants::default();
        let mut sys = NvSystem::typical(1.6e-3);
        sys.bx = bx;
        let dbx = ratio * dbz;
        let xi = predict_isolation(&sys, &c, dbz, dbx).unwrap().ratio;
        let m = invert_misalignment(xi, sys.d0, sys.b0, &c, dbz, dbx).unwrap();
        prop_assert!((m.bx / bx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn odmr_spectrum_bounded(b0 in 5e-4f64..0.01, contrast in 1e-3f64..0.15) {
        let c = PhysicalConstants::default();
        let mut sys = NvSystem::typical(b0);
        sys.lineshape = LineshapeParams::new(1e6, contrast);
        let grid: Vec<f64> = (0..2000).map(|i| 2.5e9 + i as f64 * 4e5).collect();
        let s = odmr_spectrum(&sys, &c, &grid).unwrap();
        prop_assert!(s.iter().all(|v| *v > 0.0 && *v <= 1.0));
    }

    #[test]
    fn single_line_response_is_odd(depth in 1e4f64..3e6, x in -5e6f64..5e6) {
        let line = LineshapeParams::new(1e6, 0.01);
        let a = demod_response(&line, depth, x);
        let b = demod_response(&line, depth, -x);
        let peak = demod_response(&line, depth, 0.5e6).abs().max(a.abs());
        prop_assert!((a + b).abs() < 1e-9 * peak);
    }
}

#[test]
fn spectrum_recovers_monotonically_away_from_lines() {
    let c = PhysicalConstants::default();
    let sys = NvSystem::typical(1.6e-3);
    let top = transition_frequencies(&sys, &c).unwrap().last().unwrap().1;
    let grid: Vec<f64> = (0..200).map(|i| top + 1e6 + i as f64 * 1e6).collect();
    let s = odmr_spectrum(&sys, &c, &grid).unwrap();
    assert!(s.windows(2).all(|w| w[1] >= w[0]));
    assert!(1.0 - s.last().unwrap() < 1e-5);
}
