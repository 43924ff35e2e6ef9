use serde::{Deserialize, Serialize};

use super::TransitionLabel;
use crate::error::{Error, Result};

/// Rabi rates of the two microwave tones closing a V-configuration, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiPair {
    pub omega_plus: f64,
    pub omega_minus: f64,
}

/// Bright and dark superpositions in the {|−1⟩, |+1⟩} basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkState {
    /// Coefficients (⟨−1|B⟩, ⟨+1|B⟩).
    pub bright: [f64; 2],
    /// Coefficients (⟨−1|D⟩, ⟨+1|D⟩).
    pub dark: [f64; 2],
    /// |⟨−1|D⟩|².
    pub overlap_minus1_dark: f64,
}

pub fn cpt_dark_state(rabi: RabiPair) -> Result<DarkState> {
    let RabiPair {
        omega_plus: op,
        omega_minus: om,
    } = rabi;
    if !(op.is_finite() && om.is_finite()) || op < 0.0 || om < 0.0 {
        return Err(Error::param(
            "rabi",
            format!("Rabi rates must be finite and >= 0, got ({op}, {om})"),
        ));
    }
    let sum_sq = op * op + om * om;
    if sum_sq == 0.0 {
        return Err(Error::param("rabi", "both Rabi rates are zero"));
    }
    let norm = sum_sq.sqrt();
    Ok(DarkState {
        bright: [om / norm, op / norm],
        dark: [op / norm, -om / norm],
        overlap_minus1_dark: op * op / sum_sq,
    })
}

/// True when the two transitions share a nuclear projection on opposite
/// electron branches, i.e. a common |0, m_I⟩ ground level.
pub fn is_cpt_pair(a: TransitionLabel, b: TransitionLabel) -> bool {
    a.branch != b.branch && a.m_i == b.m_i
}
