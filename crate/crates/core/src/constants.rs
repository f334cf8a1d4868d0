//! Empirical constants frozen after a calibration run.
//!
//! Calibration: 2·10⁶ samples per kernel for the smoothness ratio and 10⁶ per
//! scale for the regularized ratio, seed [`CALIBRATION_SEED`]. Observed maxima
//! are listed next to each constant.

pub const CALIBRATION_SEED: u64 = 20261016;

/// Smoothness constant for `P`, `P*`, `P_sym` in `n = 1, 2`.
/// Observed: 1.99 / 1.99 / 1.00 (n = 1), 5.80 / 5.77 / 2.90 (n = 2).
pub const A_CZ: f64 = 8.0;

/// Smoothness constants by spatial dimension `n = 1, 2, 3`; n = 3 observed 11.44.
pub const A_CZ_BY_DIM: [f64; 3] = [8.0, 8.0, 16.0];

/// Smoothness constant for `P_sym ψ_τ` with the default cubic profile.
/// Observed: 1.090 (n = 1), 2.761 (n = 2), identical at every τ in 10⁻³..10.
pub const REGULARIZED_CZ_BY_DIM: [f64; 2] = [1.25, 3.0];

/// Multiplicity ceiling for the fivefold Whitney cubes in the plane.
/// Observed: at most 139 over 10⁵ points on ten covers (unit square, two
/// squares, L-shape, 2 x 1 and ½ x 2 rectangles at generations 2 and 3).
pub const WHITNEY_OVERLAP_5: usize = 150;

/// Multiplicity ceiling for `{10 Q_j}` in the plane. Observed: at most 146 on the same runs.
pub const WHITNEY_OVERLAP_10: usize = 160;

/// Ceiling for the union-to-sum ratio of lower capacity bounds.
pub const SEMI_ADDITIVITY_CEILING: f64 = 4.0;

pub fn a_cz(n: usize) -> Option<f64> {
    A_CZ_BY_DIM.get(n.checked_sub(1)?).copied()
}
