//! Lorentzian cw-ODMR lineshape, the first-harmonic (lock-in) response of a
//! frequency-modulated drive, and the closed-form shot-noise sensitivities.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::spin::{line_frequency, NvSystem, PhysicalConstants, TransitionLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineOverride {
    pub label: TransitionLabel,
    pub linewidth: f64,
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineshapeParams {
    /// FWHM of each line, Hz.
    pub linewidth: f64,
    /// Fractional fluorescence dip at the center of each line.
    pub contrast: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<LineOverride>,
}

impl LineshapeParams {
    pub fn new(linewidth: f64, contrast: f64) -> Self {
        Self {
            linewidth,
            contrast,
            overrides: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |w: f64, c: f64| -> Result<()> {
            ensure_positive("linewidth", w)?;
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::param("contrast", format!("must lie in (0, 1), got {c}")));
            }
            Ok(())
        };
        check(self.linewidth, self.contrast)?;
        for o in &self.overrides {
            check(o.linewidth, o.contrast)?;
        }
        let total: f64 = TransitionLabel::all().iter().map(|&l| self.line(l).1).sum();
        if total >= 1.0 {
            return Err(Error::param(
                "contrast",
                format!("sum of line contrasts must be < 1, got {total}"),
            ));
        }
        Ok(())
    }

    /// (linewidth, contrast) for one line, honoring overrides.
    pub fn line(&self, label: TransitionLabel) -> (f64, f64) {
        self.overrides
            .iter()
            .rev()
            .find(|o| o.label == label)
            .map(|o| (o.linewidth, o.contrast))
            .unwrap_or((self.linewidth, self.contrast))
    }
}

/// Unit-peak Lorentzian of full width `fwhm`.
#[inline]
pub fn lorentzian(x: f64, fwhm: f64) -> f64 {
    let u = 2.0 * x / fwhm;
    1.0 / (1.0 + u * u)
}

/// One resonance of the ODMR spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub label: TransitionLabel,
    pub center: f64,
    pub fwhm: f64,
    pub contrast: f64,
}

impl Line {
    #[inline]
    pub fn dip(&self, f: f64) -> f64 {
        self.contrast * lorentzian(f - self.center, self.fwhm)
    }
}

pub fn odmr_lines(sys: &NvSystem, consts: &PhysicalConstants) -> Vec<Line> {
    TransitionLabel::all()
        .into_iter()
        .map(|label| {
            let (fwhm, contrast) = sys.lineshape.line(label);
            Line {
                label,
                center: line_frequency(sys, consts, label),
                fwhm,
                contrast,
            }
        })
        .collect()
}

/// Normalized fluorescence F(f) = 1 − Σ C_k·L_k(f − f_k) on a frequency grid.
pub fn odmr_spectrum(sys: &NvSystem, consts: &PhysicalConstants, grid: &[f64]) -> Result<Vec<f64>> {
    sys.validate()?;
    if let Some(bad) = grid.iter().find(|f| !f.is_finite()) {
        return Err(Error::param("grid", format!("non-finite frequency {bad}")));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("grid", "must be sorted ascending"));
    }
    let lines = odmr_lines(sys, consts);
    Ok(grid
        .iter()
        .map(|&f| 1.0 - lines.iter().map(|l| l.dip(f)).sum::<f64>())
        .collect())
}

const QUAD_START_NODES: usize = 64;
const QUAD_MAX_NODES: usize = 1 << 16;
const QUAD_REL_TOL: f64 = 1e-8;

/// First cosine Fourier coefficient of θ ↦ g(center + depth·cos θ):
/// (1/π)∫₀^{2π} g(center + depth·cos θ)·cos θ dθ.
///
/// Periodic trapezoid rule, node count doubled (reusing previous nodes) from
/// 64 until successive estimates agree to 1e-8 relative.
pub fn first_harmonic<G: Fn(f64) -> f64>(g: G, center: f64, depth: f64) -> f64 {
    harmonic_coefficient(&g, center, depth, 1)
}

/// n-th cosine Fourier coefficient, same quadrature as [`first_harmonic`].
pub fn harmonic_coefficient<G: Fn(f64) -> f64>(g: &G, center: f64, depth: f64, n: u32) -> f64 {
    let n = f64::from(n);
    let term = |theta: f64| g(center + depth * theta.cos()) * (n * theta).cos();
    let mut nodes = QUAD_START_NODES;
    let mut sum: f64 = (0..nodes)
        .map(|k| term(std::f64::consts::TAU * k as f64 / nodes as f64))
        .sum();
    let mut scale: f64 = (0..nodes)
        .map(|k| term(std::f64::consts::TAU * k as f64 / nodes as f64).abs())
        .sum::<f64>()
        / nodes as f64;
    let mut estimate = 2.0 * sum / nodes as f64;
    while nodes < QUAD_MAX_NODES {
        let h = std::f64::consts::TAU / (2 * nodes) as f64;
        let odd: f64 = (0..nodes).map(|k| term(h * (2 * k + 1) as f64)).sum();
        sum += odd;
        nodes *= 2;
        scale = scale.max(1e-300);
        let next = 2.0 * sum / nodes as f64;
        let delta = (next - estimate).abs();
        estimate = next;
        if delta <= QUAD_REL_TOL * next.abs() || delta <= 1e-14 * scale {
            break;
        }
    }
    estimate
}

/// Lock-in response of a single Lorentzian line to a sinusoidal FM drive of
/// depth `mod_depth` centered `detuning` away from the line.
///
/// Uses the base (non-override) linewidth and contrast. Positive for a drive
/// above the line center.
pub fn demod_response(line: &LineshapeParams, mod_depth: f64, detuning: f64) -> f64 {
    let (w, c) = (line.linewidth, line.contrast);
    first_harmonic(|x| -c * lorentzian(x, w), detuning, mod_depth)
}

/// d(demod_response)/d(detuning) at zero detuning, by central difference
/// with step linewidth/1000.
pub fn zero_crossing_slope(line: &LineshapeParams, mod_depth: f64) -> Result<f64> {
    ensure_positive("mod_depth", mod_depth)?;
    line.validate()?;
    let h = line.linewidth / 1000.0;
    Ok((demod_response(line, mod_depth, h) - demod_response(line, mod_depth, -h)) / (2.0 * h))
}

/// Sampled response curve around a drive point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub detuning: Vec<f64>,
    pub response: Vec<f64>,
    /// Slope at zero detuning, per Hz.
    pub slope_at_zero: f64,
}

impl ResponseCurve {
    pub fn single_line(line: &LineshapeParams, mod_depth: f64, detuning: &[f64]) -> Result<Self> {
        let slope_at_zero = zero_crossing_slope(line, mod_depth)?;
        Ok(Self {
            detuning: detuning.to_vec(),
            response: detuning
                .iter()
                .map(|&d| demod_response(line, mod_depth, d))
                .collect(),
            slope_at_zero,
        })
    }
}

/// Lock-in response of one drive channel seeing the full multi-line
/// spectrum. Detuning is measured from the drive center toward higher
/// frequency relative to the lines: a line moving down by Δ looks like a
/// detuning of +Δ.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResponse {
    /// Lines relative to the drive center (center = line − drive center).
    pub lines: Vec<Line>,
    pub mod_depth: f64,
    pub gain: f64,
}

impl ChannelResponse {
    pub fn new(lines: &[Line], drive_center: f64, mod_depth: f64, gain: f64) -> Self {
        Self {
            lines: lines
                .iter()
                .map(|l| Line {
                    center: l.center - drive_center,
                    ..*l
                })
                .collect(),
            mod_depth,
            gain,
        }
    }

    pub fn response(&self, detuning: f64) -> f64 {
        let lines = &self.lines;
        self.gain
            * first_harmonic(
                |x| -lines.iter().map(|l| l.dip(x)).sum::<f64>(),
                detuning,
                self.mod_depth,
            )
    }

    pub fn slope(&self) -> f64 {
        let h = self
            .lines
            .iter()
            .map(|l| l.fwhm)
            .fold(f64::INFINITY, f64::min)
            / 1000.0;
        (self.response(h) - self.response(-h)) / (2.0 * h)
    }
}

/// Modulation depth maximizing the zero-crossing slope, searched in
/// (0, 4·linewidth] by golden-section refinement of a coarse scan.
pub fn slope_optimal_mod_depth(line: &LineshapeParams) -> Result<f64> {
    line.validate()?;
    let w = line.linewidth;
    let slope = |m: f64| zero_crossing_slope(line, m).unwrap_or(f64::NEG_INFINITY);
    let coarse: Vec<f64> = (1..=80).map(|k| k as f64 * w / 20.0).collect();
    let best = coarse
        .iter()
        .enumerate()
        .max_by(|a, b| slope(*a.1).total_cmp(&slope(*b.1)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut lo = if best == 0 { w / 1000.0 } else { coarse[best - 1] };
    let mut hi = coarse[(best + 1).min(coarse.len() - 1)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-6 * w {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if slope(a) < slope(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Modulation depth above the slope optimum at which the channel's
/// zero-crossing slope equals `target` (per Hz), found by bisection.
pub fn mod_depth_for_slope(resp: &ChannelResponse, target: f64, upper: f64) -> Result<f64> {
    ensure_positive("target", target)?;
    let w = resp
        .lines
        .iter()
        .map(|l| l.fwhm)
        .fold(f64::INFINITY, f64::min);
    let slope_at = |m: f64| {
        ChannelResponse {
            mod_depth: m,
            ..resp.clone()
        }
        .slope()
    };
    let peak = (1..=40)
        .map(|k| k as f64 * w / 20.0)
        .max_by(|a, b| slope_at(*a).total_cmp(&slope_at(*b)))
        .unwrap_or(w / 2.0);
    let (mut lo, mut hi) = (peak, upper);
    if slope_at(lo) < target || slope_at(hi) > target {
        return Err(Error::param(
            "target",
            format!("slope {target:.4e}/Hz not bracketed in [{lo:.4e}, {hi:.4e}] Hz"),
        ));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if slope_at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseSensitivity {
    /// T/√Hz.
    pub eta_b: f64,
    /// K/√Hz.
    pub eta_t: f64,
}

/// Shot-noise-limited field and temperature sensitivity:
/// η_B = Δf / ((γ/2π)·C) · √(2e/i_ph), η_T = (γ/2π)/κ · η_B.
pub fn shot_noise_sensitivity(
    linewidth: f64,
    contrast: f64,
    photocurrent: f64,
    consts: &PhysicalConstants,
) -> Result<ShotNoiseSensitivity> {
    ensure_positive("linewidth", linewidth)?;
    ensure_positive("contrast", contrast)?;
    ensure_positive("photocurrent", photocurrent)?;
    consts.validate()?;
    let eta_b = linewidth / (consts.gamma_over_2pi * contrast)
        * (2.0 * consts.electron_charge / photocurrent).sqrt();
    Ok(ShotNoiseSensitivity {
        eta_b,
        eta_t: consts.gamma_over_2pi / consts.kappa * eta_b,
    })
}

/// η·√V, in T·µm^{3/2}/√Hz when `volume_um3` is in µm³.
pub fn volume_normalized_sensitivity(eta_b: f64, volume_um3: f64) -> Result<f64> {
    ensure_finite("eta_b", eta_b)?;
    ensure_positive("volume", volume_um3)?;
    Ok(eta_b * volume_um3.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Branch;
    use approx::assert_relative_eq;

    fn params() -> LineshapeParams {
        LineshapeParams::new(1.0e6, 0.01)
    }

    #[test]
    fn far_detuned_is_unity() {
        let sys = NvSystem::typical(1.6e-3);
        let c = PhysicalConstants::default();
        let v = odmr_spectrum(&sys, &c, &[1.0e9, 2.0e9, 4.0e9]).unwrap();
        for x in v {
            assert!((x - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn isolated_line_center_dips_by_contrast() {
        let mut sys = NvSystem::typical(10e-3);
        sys.azz = 50e6;
        let c = PhysicalConstants::default();
        let f = line_frequency(&sys, &c, TransitionLabel::new(Branch::Plus, 0).unwrap());
        let v = odmr_spectrum(&sys, &c, &[f]).unwrap()[0];
        // neighbours 50 MHz away each add C/(1 + 100²) ≈ 1e-6
        assert_relative_eq!(v, 1.0 - 0.01, epsilon = 3e-6);
    }

    #[test]
    fn two_lines_one_fwhm_apart() {
        // midpoint sits half a FWHM from each line: L = 1/(1+1) = 0.5 each
        let w = 1.0e6;
        let c = 0.02;
        let lines = [-0.5 * w, 0.5 * w];
        let mid = 1.0 - lines.iter().map(|&x| c * lorentzian(0.0 - x, w)).sum::<f64>();
        assert_relative_eq!(mid, 1.0 - c, max_relative = 1e-15);
        // on a line center the neighbor contributes L(FWHM) = 1/(1+4)
        let on = 1.0 - lines.iter().map(|&x| c * lorentzian(0.5 * w - x, w)).sum::<f64>();
        assert_relative_eq!(on, 1.0 - 1.2 * c, max_relative = 1e-15);
    }

    #[test]
    fn rejects_unsorted_grid() {
        let sys = NvSystem::typical(1.6e-3);
        let c = PhysicalConstants::default();
        assert!(odmr_spectrum(&sys, &c, &[2.0e9, 1.0e9]).is_err());
        assert!(odmr_spectrum(&sys, &c, &[f64::NAN]).is_err());
    }

    #[test]
    fn response_zero_on_center_and_far() {
        let p = params();
        assert!(demod_response(&p, 0.55e6, 0.0).abs() < 1e-18);
        assert!(demod_response(&p, 0.55e6, 1e12).abs() < 1e-14);
        assert!(demod_response(&p, 0.55e6, -1e12).abs() < 1e-14);
    }

    #[test]
    fn small_depth_matches_derivative() {
        // finite-difference oracle for m·F'(δ)
        let p = params();
        let m = p.linewidth / 100.0;
        let f = |x: f64| 1.0 - p.contrast * lorentzian(x, p.linewidth);
        for &d in &[0.1e6, 0.3e6, -0.45e6, 1.2e6] {
            let h = 1.0;
            let deriv = (f(d + h) - f(d - h)) / (2.0 * h);
            let r = demod_response(&p, m, d);
            assert!(((r - m * deriv) / (m * deriv)).abs() < 0.01, "d={d}");
        }
    }

    #[test]
    fn response_odd_in_detuning() {
        let p = params();
        let grid: Vec<f64> = (0..200).map(|k| k as f64 * 2.0e4).collect();
        let max = grid
            .iter()
            .map(|&d| demod_response(&p, 0.55e6, d).abs())
            .fold(0.0, f64::max);
        for &d in &grid {
            let s = demod_response(&p, 0.55e6, d) + demod_response(&p, 0.55e6, -d);
            assert!(s.abs() < 1e-9 * max);
        }
    }

    #[test]
    fn quadrature_against_dense_sum() {
        let p = params();
        let n = 200_000;
        for &(m, d) in &[(0.55e6, 0.2e6), (2.0e6, -0.7e6), (0.05e6, 0.4e6)] {
            let dense: f64 = (0..n)
                .map(|k| {
                    let th = std::f64::consts::TAU * (k as f64 + 0.5) / n as f64;
                    -p.contrast * lorentzian(d + m * th.cos(), p.linewidth) * th.cos()
                })
                .sum::<f64>()
                * 2.0
                / n as f64;
            assert_relative_eq!(demod_response(&p, m, d), dense, max_relative = 1e-8);
        }
    }

    #[test]
    fn slope_linear_in_contrast() {
        let a = zero_crossing_slope(&LineshapeParams::new(1e6, 0.01), 0.55e6).unwrap();
        let b = zero_crossing_slope(&LineshapeParams::new(1e6, 0.02), 0.55e6).unwrap();
        assert!(a > 0.0);
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-10);
        assert!(zero_crossing_slope(&params(), 0.0).is_err());
    }

    #[test]
    fn optimal_depth_matches_grid_search() {
        let p = params();
        let oracle = (1..=400)
            .map(|k| k as f64 * 5e3)
            .max_by(|a, b| {
                zero_crossing_slope(&p, *a)
                    .unwrap()
                    .total_cmp(&zero_crossing_slope(&p, *b).unwrap())
            })
            .unwrap();
        let found = slope_optimal_mod_depth(&p).unwrap();
        assert!(((found - oracle) / oracle).abs() < 0.1, "{found} vs {oracle}");
        assert!(found > 0.2 * p.linewidth && found < 0.7 * p.linewidth);
    }

    #[test]
    fn channel_response_single_line_agrees() {
        let line = Line {
            label: TransitionLabel::new(Branch::Plus, 0).unwrap(),
            center: 2.9e9,
            fwhm: 1e6,
            contrast: 0.01,
        };
        let ch = ChannelResponse::new(&[line], 2.9e9, 0.55e6, 1.0);
        for &d in &[0.0, 0.1e6, -0.3e6] {
            assert_relative_eq!(
                ch.response(d),
                demod_response(&params(), 0.55e6, d),
                max_relative = 1e-12,
                epsilon = 1e-20
            );
        }
        assert_relative_eq!(
            ch.slope(),
            zero_crossing_slope(&params(), 0.55e6).unwrap(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn depth_for_slope_hits_target() {
        let line = Line {
            label: TransitionLabel::new(Branch::Plus, 0).unwrap(),
            center: 0.0,
            fwhm: 1e6,
            contrast: 0.01,
        };
        let ch = ChannelResponse::new(&[line], 0.0, 0.5e6, 1.0);
        let target = 0.01 / 1e6;
        let m = mod_depth_for_slope(&ch, target, 5e6).unwrap();
        let at = ChannelResponse { mod_depth: m, ..ch }.slope();
        assert_relative_eq!(at, target, max_relative = 1e-6);
        assert!(m > 0.5e6);
    }

    #[test]
    fn closed_form_sensitivity() {
        let c = PhysicalConstants::default();
        let s = shot_noise_sensitivity(1e6, 0.01, 10e-3, &c).unwrap();
        assert!((s.eta_b - 20.2e-12).abs() < 0.1e-12, "{}", s.eta_b);
        assert!((s.eta_t - 7.63e-6).abs() < 0.01e-6, "{}", s.eta_t);
        let q = shot_noise_sensitivity(1e6, 0.01, 40e-3, &c).unwrap();
        assert_relative_eq!(q.eta_b, s.eta_b / 2.0, max_relative = 1e-14);
        let h = shot_noise_sensitivity(1e6, 0.005, 10e-3, &c).unwrap();
        assert_relative_eq!(h.eta_b, 2.0 * s.eta_b, max_relative = 1e-14);
        assert_relative_eq!(h.eta_t, 2.0 * s.eta_t, max_relative = 1e-14);
        assert!(shot_noise_sensitivity(1e6, 0.0, 10e-3, &c).is_err());
        assert!(shot_noise_sensitivity(1e6, 0.01, 0.0, &c).is_err());
    }

    #[test]
    fn volume_normalization() {
        let v = volume_normalized_sensitivity(70e-12, 6e7).unwrap();
        assert!((v - 542e-9).abs() / 542e-9 < 0.005);
        assert_eq!(volume_normalized_sensitivity(70e-12, 1.0).unwrap(), 70e-12);
        assert_relative_eq!(
            volume_normalized_sensitivity(70e-12, 4e7).unwrap(),
            2.0 * volume_normalized_sensitivity(70e-12, 1e7).unwrap(),
            max_relative = 1e-14
        );
        assert!(volume_normalized_sensitivity(70e-12, 0.0).is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut p = params();
        let l = TransitionLabel::new(Branch::Minus, 1).unwrap();
        p.overrides.push(LineOverride {
            label: l,
            linewidth: 2e6,
            contrast: 0.03,
        });
        assert_eq!(p.line(l), (2e6, 0.03));
        assert_eq!(p.line(TransitionLabel::new(Branch::Minus, 0).unwrap()), (1e6, 0.01));
        p.overrides[0].contrast = 0.99;
        assert!(p.validate().is_err());
    }
}
