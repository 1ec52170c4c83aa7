use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::tolerances::{HERMITIAN_TOL, UNITARY_TOL};
use crate::{CMatrix, C64};

/// Dense square operator with cached structural assertions.
///
/// The `hermitian` / `unitary` flags are only ever set after the property was
/// verified (or when it holds by construction).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: CMatrix,
    hermitian: bool,
    unitary: bool,
}

impl DenseOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::domain(format!(
                "operator must be square, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DenseOperator {
            matrix,
            hermitian: false,
            unitary: false,
        })
    }

    pub fn identity(dim: usize) -> Self {
        DenseOperator {
            matrix: CMatrix::identity(dim, dim),
            hermitian: true,
            unitary: true,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        DenseOperator {
            matrix: CMatrix::zeros(dim, dim),
            hermitian: true,
            unitary: false,
        }
    }

    /// Wraps `matrix` after checking `‖A − A†‖_F ≤ tol·‖A‖_F`.
    pub fn hermitian(matrix: CMatrix) -> Result<Self> {
        let mut op = DenseOperator::new(matrix)?;
        let defect = op.hermiticity_defect();
        if defect > HERMITIAN_TOL * op.frobenius_norm().max(f64::MIN_POSITIVE) && defect > 0.0 {
            return Err(Error::domain(format!(
                "operator is not Hermitian (‖A−A†‖_F = {defect:.3e})"
            )));
        }
        op.hermitian = true;
        Ok(op)
    }

    /// Wraps `matrix` after checking `‖U†U − 1‖_F ≤ UNITARY_TOL`.
    pub fn unitary(matrix: CMatrix) -> Result<Self> {
        let mut op = DenseOperator::new(matrix)?;
        let defect = op.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(Error::domain(format!(
                "operator is not unitary (‖U†U−1‖_F = {defect:.3e})"
            )));
        }
        op.unitary = true;
        Ok(op)
    }

    pub(crate) fn new_hermitian_unchecked(matrix: CMatrix) -> Self {
        DenseOperator {
            matrix,
            hermitian: true,
            unitary: false,
        }
    }

    pub(crate) fn new_unitary_unchecked(matrix: CMatrix) -> Self {
        DenseOperator {
            matrix,
            hermitian: false,
            unitary: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// `‖A − A†‖_F`.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm()
    }

    /// `‖A†A − 1‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        (self.matrix.adjoint() * &self.matrix - CMatrix::identity(n, n)).norm()
    }

    pub fn adjoint(&self) -> DenseOperator {
        DenseOperator {
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
            unitary: self.unitary,
        }
    }

    fn check_same_dim(&self, other: &DenseOperator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.check_same_dim(other)?;
        let c = &self.matrix * &other.matrix - &other.matrix * &self.matrix;
        DenseOperator::new(c)
    }

    /// Product that keeps the unitary flag when both factors carry it.
    pub fn compose(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.check_same_dim(other)?;
        Ok(DenseOperator {
            matrix: &self.matrix * &other.matrix,
            hermitian: false,
            unitary: self.unitary && other.unitary,
        })
    }

    /// `A X A†`; Hermiticity of `X` is kept when `A` is unitary.
    pub fn conjugate(&self, x: &DenseOperator) -> Result<DenseOperator> {
        self.check_same_dim(x)?;
        let m = &self.matrix * &x.matrix * self.matrix.adjoint();
        Ok(DenseOperator {
            matrix: m,
            hermitian: self.unitary && x.hermitian,
            unitary: self.unitary && x.unitary,
        })
    }

    /// Eigenvalues in ascending order; requires the Hermitian flag.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.hermitian {
            return Err(Error::domain("eigenvalues requested for a non-Hermitian operator"));
        }
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        Ok(v)
    }
}

/// Kronecker product `a ⊗ b` (a is the slower index).
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// One Newton–Schulz step towards the unitary polar factor,
/// `X(3 − X†X)/2`. Squares the unitarity defect of a near-unitary `X`.
pub fn reunitarize(x: &CMatrix) -> CMatrix {
    let n = x.nrows();
    let xtx = x.adjoint() * x;
    x * (CMatrix::identity(n, n) * C64::new(3.0, 0.0) - xtx) * C64::new(0.5, 0.0)
}

/// `exp(−i·dt·h)` for Hermitian `h`, via eigendecomposition.
pub fn expm_skew(h: &DenseOperator, dt: f64) -> Result<DenseOperator> {
    if !h.is_hermitian() {
        return Err(Error::domain("expm_skew requires a Hermitian generator"));
    }
    if !dt.is_finite() {
        return Err(Error::domain("expm_skew: non-finite time step"));
    }
    let n = h.dim();
    if dt == 0.0 {
        return Ok(DenseOperator::identity(n));
    }
    let eig = SymmetricEigen::new(h.matrix().clone());
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, -dt * lambda);
        for i in 0..n {
            scaled[(i, j)] *= phase;
        }
    }
    let u = reunitarize(&(scaled * v.adjoint()));
    let defect = (u.adjoint() * &u - CMatrix::identity(n, n)).norm();
    if defect > UNITARY_TOL {
        return Err(Error::domain(format!(
            "expm_skew lost unitarity (‖U†U−1‖_F = {defect:.3e})"
        )));
    }
    Ok(DenseOperator::new_unitary_unchecked(u))
}
