//! Multi-spin operators on the tensor-product Hilbert space.
//!
//! Basis convention: site 0 is the slowest-varying Kronecker index and each
//! site's basis is ordered by descending `S³` eigenvalue (`m = s, s−1, …, −s`).

mod apply;
mod dense;
mod expr;
mod spin;

pub use apply::{apply, embed, embed_with_cap, StateVector};
pub use dense::{expm_skew, kron, reunitarize, DenseOperator};
pub use expr::{commutator, Operator, OperatorExpr, SpinFactor, Term};
pub use spin::{levi_civita, single_spin_matrix, Axis, Spin, SpinSystem};

