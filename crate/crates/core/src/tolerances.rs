//! Pinned numerical thresholds.
//!
//! Everything that decides pass/fail lives here so the library, the scenario
//! runner and the acceptance suite agree on the same numbers.

/// Default cap on the dense dimension (12 spin-1/2 sites).
pub const DENSE_CAP: usize = 4096;

/// Coefficients below this magnitude are dropped on canonicalization.
pub const TERM_EPSILON: f64 = 1e-14;

/// Relative Hermiticity tolerance, `‖A − A†‖_F ≤ tol·‖A‖_F`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Unitarity tolerance, `‖U†U − 1‖_F ≤ tol`.
pub const UNITARY_TOL: f64 = 1e-10;

/// Absolute tolerance on the (c1)/(c2) coupling-tensor residuals.
pub const STRUCTURAL_TOL: f64 = 1e-12;

/// Numeric rotational-invariance tolerance per unit of Hilbert-space dimension.
pub const NUMERIC_SYMMETRY_TOL_PER_DIM: f64 = 1e-10;

/// Norm conservation of the transported `R(t)` (relative).
pub const R_NORM_TOL: f64 = 1e-9;

/// Minimum block overlap for an eigenframe to count as followed.
pub const FRAME_FOLLOWING_MIN_OVERLAP: f64 = 0.99;

/// Threshold below which `1 + R̂₃` is treated as the antipodal point `R̂ = −e₃`.
pub const ANTIPODAL_TOL: f64 = 1e-12;

/// Acceptance thresholds, one group per criterion.
pub mod acceptance {
    pub const ALGEBRA: f64 = 1e-12;
    pub const SYMMETRY_NORM: f64 = 1e-12;
    pub const THEOREM_MATCH: f64 = 1e-10;
    pub const LVN_RESIDUAL: f64 = 1e-6;
    pub const FACTORIZATION: f64 = 1e-6;
    pub const CONTROL_FACTORIZATION: f64 = 1e-2;
    pub const FRAME_CONJUGATION: f64 = 1e-10;
    pub const Z_COMMUTATOR: f64 = 1e-8;
    pub const TRANSPORT: f64 = 1e-8;
    pub const YAN_RESIDUAL: f64 = 1e-8;
    pub const SPECTRUM_DRIFT: f64 = 1e-9;
    pub const PHASE_COINCIDENCE: f64 = 1e-8;
    pub const PHASE_ADDITIVITY: f64 = 1e-6;
    pub const CONTROL_PHASE: f64 = 1e-3;
    pub const CONTROL_RESIDUAL: f64 = 1e-3;
}
