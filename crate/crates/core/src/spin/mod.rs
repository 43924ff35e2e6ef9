//! NV ground-state spin model: transition frequencies of the six hyperfine
//! lines, resonance shifts under small field/temperature excursions, the
//! off-axis isolation limit, and the CPT dark-state structure of a driven
//! V-configuration.

mod cpt;
pub mod hamiltonian;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::lineshape::LineshapeParams;

pub use cpt::{cpt_dark_state, is_cpt_pair, DarkState, RabiPair};

/// Largest accepted |B_perp| / B0 before the second-order expansion is
/// considered invalid.
pub const OFF_AXIS_LIMIT: f64 = 0.1;

/// Direction of the thermal shift of the zero-field splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ThermalSign {
    /// D decreases as temperature rises.
    #[default]
    Negative,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// NV electron gyromagnetic ratio / 2π, Hz/T.
    pub gamma_over_2pi: f64,
    /// Elementary charge, C.
    pub electron_charge: f64,
    /// |∂D/∂T|, Hz/K.
    pub kappa: f64,
    #[serde(default)]
    pub thermal_sign: ThermalSign,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            gamma_over_2pi: 28.024e9,
            electron_charge: 1.602176634e-19,
            kappa: 74.2e3,
            thermal_sign: ThermalSign::Negative,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("gamma_over_2pi", self.gamma_over_2pi)?;
        ensure_positive("electron_charge", self.electron_charge)?;
        ensure_positive("kappa", self.kappa)
    }

    /// ∂f/∂T in Hz/K, signed.
    pub fn dfdt(&self) -> f64 {
        match self.thermal_sign {
            ThermalSign::Negative => -self.kappa,
            ThermalSign::Positive => self.kappa,
        }
    }
}

/// Which resonance-shift expansion to use for off-axis field excursions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftModel {
    /// No off-axis contribution at all.
    FirstOrder,
    /// Linear-in-ΔBx second-order cross term, ΔBx² dropped.
    #[default]
    CrossTerm,
    /// Full second-order quadratic, including the ΔBx² term.
    FullQuadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NvSystem {
    /// Zero-field splitting at the reference temperature, Hz.
    pub d0: f64,
    /// On-axis bias field, T.
    pub b0: f64,
    /// Static off-axis field components, T.
    pub bx: f64,
    pub by: f64,
    /// ¹⁴N hyperfine coupling, Hz.
    pub azz: f64,
    /// ¹⁴N quadrupole splitting, Hz.
    pub pq: f64,
    pub lineshape: LineshapeParams,
    /// Expansion used when synthesizing traces.
    #[serde(default)]
    pub shift_model: ShiftModel,
}

impl NvSystem {
    /// Bias field, hyperfine constants and lineshape typical of a [111]
    /// ensemble at a few mT.
    pub fn typical(b0: f64) -> Self {
        Self {
            d0: 2.87e9,
            b0,
            bx: 0.0,
            by: 0.0,
            azz: -2.16e6,
            pq: -4.95e6,
            lineshape: LineshapeParams::new(1.0e6, 0.01),
            shift_model: ShiftModel::CrossTerm,
        }
    }

    pub fn off_axis_field(&self) -> f64 {
        self.bx.hypot(self.by)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("d0", self.d0)?;
        ensure_finite("b0", self.b0)?;
        ensure_finite("bx", self.bx)?;
        ensure_finite("by", self.by)?;
        ensure_finite("azz", self.azz)?;
        ensure_finite("pq", self.pq)?;
        if self.b0 < 0.0 {
            return Err(Error::param("b0", format!("must be >= 0, got {}", self.b0)));
        }
        let perp = self.off_axis_field();
        if perp > 0.0 {
            let ratio = if self.b0 > 0.0 { perp / self.b0 } else { f64::INFINITY };
            if ratio > OFF_AXIS_LIMIT {
                return Err(Error::OffAxisOutOfRegime {
                    ratio,
                    limit: OFF_AXIS_LIMIT,
                });
            }
        }
        self.lineshape.validate()
    }
}

/// Electron-spin branch of a transition: m_s 0↔−1 or 0↔+1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionLabel {
    pub branch: Branch,
    pub m_i: i8,
}

impl TransitionLabel {
    pub fn new(branch: Branch, m_i: i8) -> Result<Self> {
        if !(-1..=1).contains(&m_i) {
            return Err(Error::param("m_i", format!("must be -1, 0 or +1, got {m_i}")));
        }
        Ok(Self { branch, m_i })
    }

    /// All six labels, minus branch first.
    pub fn all() -> [TransitionLabel; 6] {
        let mut out = [TransitionLabel {
            branch: Branch::Minus,
            m_i: 0,
        }; 6];
        let mut k = 0;
        for branch in [Branch::Minus, Branch::Plus] {
            for m_i in -1..=1 {
                out[k] = TransitionLabel { branch, m_i };
                k += 1;
            }
        }
        out
    }
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = match self.branch {
            Branch::Minus => "minus",
            Branch::Plus => "plus",
        };
        write!(f, "({b}, mI={:+})", self.m_i)
    }
}

/// Frequency of one line in the secular (on-axis) approximation.
///
/// f = D0 ± [(γ/2π)·B0 + Azz·m_I]; the quadrupole term is common to both
/// levels of a transition and drops out.
pub fn line_frequency(sys: &NvSystem, consts: &PhysicalConstants, label: TransitionLabel) -> f64 {
    let zeeman = consts.gamma_over_2pi * sys.b0 + sys.azz * f64::from(label.m_i);
    sys.d0 + label.branch.sign() * zeeman
}

/// The six ODMR line frequencies, sorted ascending.
pub fn transition_frequencies(
    sys: &NvSystem,
    consts: &PhysicalConstants,
) -> Result<Vec<(TransitionLabel, f64)>> {
    sys.validate()?;
    consts.validate()?;
    let mut lines: Vec<_> = TransitionLabel::all()
        .into_iter()
        .map(|l| (l, line_frequency(sys, consts, l)))
        .collect();
    lines.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ResonanceShift {
    pub plus: f64,
    pub minus: f64,
}

impl ResonanceShift {
    pub fn branch(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => self.plus,
            Branch::Minus => self.minus,
        }
    }
}

/// Shift of both triplet centers for small ΔT, ΔBz, ΔBx excursions.
pub fn resonance_shift(
    sys: &NvSystem,
    consts: &PhysicalConstants,
    dt: f64,
    dbz: f64,
    dbx: f64,
) -> ResonanceShift {
    if dbx != 0.0 && dbx.abs() >= sys.bx.abs() {
        log::warn!(
            "|dBx| = {:.3e} T is not smaller than |Bx| = {:.3e} T; cross-term expansion is outside its assumptions",
            dbx.abs(),
            sys.bx.abs()
        );
    }
    resonance_shift_with(ShiftModel::CrossTerm, sys, consts, dt, dbz, dbx)
}

pub fn resonance_shift_with(
    model: ShiftModel,
    sys: &NvSystem,
    consts: &PhysicalConstants,
    dt: f64,
    dbz: f64,
    dbx: f64,
) -> ResonanceShift {
    let g = consts.gamma_over_2pi;
    let common = consts.dfdt() * dt + off_axis_shift(model, sys, consts, dbx);
    let zeeman = g * dbz;
    ResonanceShift {
        plus: common + zeeman,
        minus: common - zeeman,
    }
}

/// Common-mode transition shift produced by an off-axis excursion ΔBx.
pub fn off_axis_shift(model: ShiftModel, sys: &NvSystem, consts: &PhysicalConstants, dbx: f64) -> f64 {
    let k = 3.0 * consts.gamma_over_2pi * consts.gamma_over_2pi / sys.d0;
    match model {
        ShiftModel::FirstOrder => 0.0,
        ShiftModel::CrossTerm => k * sys.bx * dbx,
        ShiftModel::FullQuadratic => k * (sys.bx * dbx + 0.5 * dbx * dbx),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsolationPrediction {
    /// Magnetometry-to-thermometry amplitude ratio; `inf` when aligned.
    pub ratio: f64,
    /// 10·log10(ratio).
    pub db_power: f64,
    /// 20·log10(ratio).
    pub db_amplitude: f64,
    pub aligned: bool,
}

impl IsolationPrediction {
    pub fn from_ratio(ratio: f64) -> Self {
        Self {
            ratio,
            db_power: 10.0 * ratio.log10(),
            db_amplitude: 20.0 * ratio.log10(),
            aligned: ratio.is_infinite(),
        }
    }
}

/// Isolation limit set by the off-axis cross term:
/// ξ = D0·ΔBz / (3·(γ/2π)·Bx·ΔBx).
pub fn predict_isolation(
    sys: &NvSystem,
    consts: &PhysicalConstants,
    dbz: f64,
    dbx: f64,
) -> Result<IsolationPrediction> {
    ensure_positive("d0", sys.d0)?;
    consts.validate()?;
    ensure_finite("dbz", dbz)?;
    ensure_finite("dbx", dbx)?;
    let denom = 3.0 * consts.gamma_over_2pi * sys.bx * dbx;
    if denom == 0.0 {
        return Ok(IsolationPrediction::from_ratio(f64::INFINITY));
    }
    Ok(IsolationPrediction::from_ratio((sys.d0 * dbz / denom).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Misalignment {
    /// Static off-axis field along the test-field direction, T.
    pub bx: f64,
    /// atan(Bx / B0), degrees.
    pub angle_deg: f64,
}

/// Off-axis field and tilt angle implied by a measured isolation ratio.
pub fn invert_misalignment(
    xi: f64,
    d0: f64,
    b0: f64,
    consts: &PhysicalConstants,
    dbz: f64,
    dbx: f64,
) -> Result<Misalignment> {
    if xi.is_nan() || xi <= 0.0 {
        return Err(Error::param("xi", format!("must be > 0, got {xi}")));
    }
    ensure_positive("d0", d0)?;
    ensure_positive("b0", b0)?;
    ensure_positive("dbz", dbz)?;
    ensure_positive("dbx", dbx)?;
    consts.validate()?;
    let bx = d0 * dbz / (3.0 * consts.gamma_over_2pi * dbx * xi);
    Ok(Misalignment {
        bx,
        angle_deg: (bx / b0).atan().to_degrees(),
    })
}
