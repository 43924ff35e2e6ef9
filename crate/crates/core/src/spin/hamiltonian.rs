//! Numeric diagonalization of the S=1 ground-state Hamiltonian
//! H = D·Sz² + (γ/2π)·B·S + Azz·m_I·Sz (secular hyperfine), per nuclear
//! projection. Used to check the perturbative shift expansion.

use nalgebra::{Matrix3, SymmetricEigen};

use super::{Branch, NvSystem, PhysicalConstants, TransitionLabel};

/// Exact transition frequency for a static field (Bx, By, Bz).
///
/// The spectrum depends on the transverse field only through
/// |B_perp| = √(Bx² + By²), so the Hamiltonian is rotated about z to make
/// it real symmetric.
pub fn exact_line_frequency(
    sys: &NvSystem,
    consts: &PhysicalConstants,
    field: [f64; 3],
    label: TransitionLabel,
) -> f64 {
    let [bx, by, bz] = field;
    let g = consts.gamma_over_2pi;
    let axial = g * bz + sys.azz * f64::from(label.m_i);
    let perp = g * bx.hypot(by) * std::f64::consts::FRAC_1_SQRT_2;
    // basis |+1⟩, |0⟩, |−1⟩
    let h = Matrix3::new(
        sys.d0 + axial, perp, 0.0, //
        perp, 0.0, perp, //
        0.0, perp, sys.d0 - axial,
    );
    let eig = SymmetricEigen::new(h);
    let mut e: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    let (ground, lower, upper) = (e[0], e[1], e[2]);
    // with axial > 0 the |−1⟩-like level is the lower of the upper pair
    let (minus, plus) = if axial >= 0.0 { (lower, upper) } else { (upper, lower) };
    match label.branch {
        Branch::Minus => minus - ground,
        Branch::Plus => plus - ground,
    }
}
