//! Numerical toolkit for general spin Hamiltonians in a changing magnetic field.
//!
//! The crate builds Hamiltonians of the form `H_s(t) = H_0(t) + H'(t)`, where
//! `H_0(t) = B(t)·Σ_i S_i` is the dipole coupling and `H'(t)` an internal
//! interaction assembled from real coupling tensors. On top of that it
//! provides:
//!
//! * [`symmetry`]: numeric and structural tests of rotational invariance of `H'`;
//! * [`invariant`]: the transported vector `R(t)` and the invariant
//!   `I(t) = R(t)·Σ_i S_i`, Liouville–von Neumann residuals and general
//!   transported invariants `U I(0) U†`;
//! * [`propagate`]: time-ordered unitary propagation with a midpoint
//!   exponential rule, the product check `U_s = U_0 U'`, rotation frames
//!   `W_i`, residual unitaries `Z_i` and su(2) generators;
//! * [`phases`]: dynamical / geometric phase decomposition in the invariant
//!   eigenframe.
//!
//! Operators are represented symbolically ([`OperatorExpr`]) or densely
//! ([`DenseOperator`]); matrix-free application is available through
//! [`algebra::apply`].

pub mod algebra;
pub mod error;
pub mod grid;
pub mod invariant;
pub mod model;
pub mod phases;
pub mod propagate;
pub mod symmetry;
pub mod tolerances;

pub use algebra::{
    apply, commutator, embed, expm_skew, single_spin_matrix, Axis, DenseOperator, Operator,
    OperatorExpr, Spin, SpinFactor, SpinSystem, StateVector, Term,
};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use model::{
    build_dipole, build_interaction, build_total, heisenberg_tensor, CouplingTensor, FieldProfile,
    InteractionComponent, InteractionSpec, ModelSpec, Schedule,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Real 3-vector (fields, `R`, generators).
pub type Vec3 = nalgebra::Vector3<f64>;
