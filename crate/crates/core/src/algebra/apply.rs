use crate::algebra::dense::DenseOperator;
use crate::algebra::expr::{OperatorExpr, SpinFactor};
use crate::algebra::spin::{site_action, SpinSystem};
use crate::error::{Error, Result};
use crate::tolerances::DENSE_CAP;
use crate::{CMatrix, CVector, C64};

/// Amplitudes on the product basis of a [`SpinSystem`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::domain("state vector has non-finite amplitudes"));
        }
        Ok(StateVector { amplitudes })
    }

    pub fn zeros(dim: usize) -> Self {
        StateVector {
            amplitudes: CVector::zeros(dim),
        }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        StateVector { amplitudes: v }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::domain("cannot normalize the zero vector"));
        }
        Ok(StateVector {
            amplitudes: &self.amplitudes / C64::new(n, 0.0),
        })
    }
}

/// `out += coeff · S_f · psi`, matrix-free.
fn apply_factor(sys: &SpinSystem, f: SpinFactor, psi: &CVector, out: &mut CVector) {
    let spin = sys.spin(f.site);
    let stride = sys.stride(f.site);
    let d = spin.dim();
    for (j, &amp) in psi.iter().enumerate() {
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        let k = (j / stride) % d;
        let (targets, n) = site_action(spin, f.axis, k);
        let base = j - k * stride;
        for &(kk, a) in &targets[..n] {
            out[base + kk * stride] += a * amp;
        }
    }
}

/// `expr · psi` without forming the dense matrix. Cost is
/// `O(terms × factors × dim)`.
pub fn apply(expr: &OperatorExpr, sys: &SpinSystem, psi: &StateVector) -> Result<StateVector> {
    expr.check_sites(sys)?;
    if psi.len() != sys.dim() {
        return Err(Error::Dimension {
            expected: sys.dim(),
            found: psi.len(),
        });
    }
    let dim = sys.dim();
    let mut result = CVector::zeros(dim);
    let mut cur = CVector::zeros(dim);
    let mut next = CVector::zeros(dim);
    for term in expr.terms() {
        cur.copy_from(psi.amplitudes());
        for &f in term.factors.iter().rev() {
            next.fill(C64::new(0.0, 0.0));
            apply_factor(sys, f, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        result.axpy(term.coeff, &cur, C64::new(1.0, 0.0));
    }
    Ok(StateVector { amplitudes: result })
}

/// Dense matrix of `expr` on `sys` under the default dimension cap.
pub fn embed(expr: &OperatorExpr, sys: &SpinSystem) -> Result<DenseOperator> {
    embed_with_cap(expr, sys, DENSE_CAP)
}

/// Dense matrix of `expr`; each column is built by pushing a basis vector
/// through the factors sparsely. The Hermitian flag is set when the result
/// passes the Hermiticity check.
pub fn embed_with_cap(expr: &OperatorExpr, sys: &SpinSystem, cap: usize) -> Result<DenseOperator> {
    expr.check_sites(sys)?;
    let dim = sys.dim();
    if dim > cap {
        return Err(Error::Capacity { dim, cap });
    }
    let mut m = CMatrix::zeros(dim, dim);
    let mut cur: Vec<(usize, C64)> = Vec::new();
    let mut next: Vec<(usize, C64)> = Vec::new();
    for term in expr.terms() {
        for col in 0..dim {
            cur.clear();
            cur.push((col, term.coeff));
            for &f in term.factors.iter().rev() {
                let spin = sys.spin(f.site);
                let stride = sys.stride(f.site);
                next.clear();
                for &(j, amp) in &cur {
                    let k = (j / stride) % spin.dim();
                    let (targets, n) = site_action(spin, f.axis, k);
                    let base = j - k * stride;
                    for &(kk, a) in &targets[..n] {
                        next.push((base + kk * stride, a * amp));
                    }
                }
                std::mem::swap(&mut cur, &mut next);
            }
            for &(row, amp) in &cur {
                m[(row, col)] += amp;
            }
        }
    }
    match DenseOperator::hermitian(m.clone()) {
        Ok(h) => Ok(h),
        Err(_) => DenseOperator::new(m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{single_spin_matrix, Axis, Spin};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(site: usize, label: u8) -> OperatorExpr {
        OperatorExpr::spin(site, Axis::from_label(label).unwrap())
    }

    fn diag(m: &DenseOperator) -> Vec<f64> {
        (0..m.dim()).map(|i| m.matrix()[(i, i)].re).collect()
    }

    #[test]
    fn embed_pads_with_identity() {
        let sys = SpinSystem::spin_half(2).unwrap();
        let m = embed(&s(0, 3), &sys).unwrap();
        assert_eq!(diag(&m), vec![0.5, 0.5, -0.5, -0.5]);
        assert!(m.is_hermitian());
    }

    #[test]
    fn embed_same_site_square_is_quarter_identity() {
        let sys = SpinSystem::spin_half(1).unwrap();
        let m = embed(&(s(0, 1) * s(0, 1)), &sys).unwrap();
        let expect = CMatrix::identity(2, 2) * C64::new(0.25, 0.0);
        assert!((m.matrix() - expect).norm() == 0.0);
    }

    #[test]
    fn heisenberg_bond_spectrum() {
        // Oracle: the 4×4 bond matrix written out by hand in the product basis.
        let mut oracle = CMatrix::zeros(4, 4);
        oracle[(0, 0)] = C64::new(0.25, 0.0);
        oracle[(3, 3)] = C64::new(0.25, 0.0);
        oracle[(1, 1)] = C64::new(-0.25, 0.0);
        oracle[(2, 2)] = C64::new(-0.25, 0.0);
        oracle[(1, 2)] = C64::new(0.5, 0.0);
        oracle[(2, 1)] = C64::new(0.5, 0.0);
        let sys = SpinSystem::spin_half(2).unwrap();
        let bond = s(0, 1) * s(1, 1) + s(0, 2) * s(1, 2) + s(0, 3) * s(1, 3);
        let m = embed(&bond, &sys).unwrap();
        assert!((m.matrix() - &oracle).norm() < 1e-15);
        let ev = m.eigenvalues().unwrap();
        let expect = [-0.75, 0.25, 0.25, 0.25];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn embed_matches_kronecker_of_single_site_matrices() {
        let sys = SpinSystem::new(vec![Spin::HALF, Spin::ONE]).unwrap();
        let a = single_spin_matrix(Spin::HALF, Axis::X).into_matrix();
        let b = single_spin_matrix(Spin::ONE, Axis::Y).into_matrix();
        let m = embed(&(s(0, 1) * s(1, 2)), &sys).unwrap();
        assert!((m.matrix() - a.kronecker(&b)).norm() < 1e-15);
    }

    #[test]
    fn capacity_error() {
        let sys = SpinSystem::spin_half(3).unwrap();
        assert!(matches!(
            embed_with_cap(&s(0, 1), &sys, 4),
            Err(Error::Capacity { dim: 8, cap: 4 })
        ));
    }

    #[test]
    fn apply_eigenstate_and_zero() {
        let sys = SpinSystem::spin_half(2).unwrap();
        let up = StateVector::basis(4, 0);
        let out = apply(&s(0, 3), &sys, &up).unwrap();
        assert_eq!(out.amplitudes()[0], C64::new(0.5, 0.0));
        assert_eq!(out.norm(), 0.5);
        let z = apply(&OperatorExpr::zero(), &sys, &up).unwrap();
        assert_eq!(z.norm(), 0.0);
    }

    fn random_expr(rng: &mut ChaCha8Rng, sys: &SpinSystem, terms: usize) -> OperatorExpr {
        let mut e = OperatorExpr::zero();
        for _ in 0..terms {
            let k = rng.gen_range(0..4);
            let factors = (0..k)
                .map(|_| SpinFactor::new(rng.gen_range(0..sys.n_sites()), Axis::from_index(rng.gen_range(0..3))))
                .collect();
            e = e + OperatorExpr::product(C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), factors);
        }
        e
    }

    fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> StateVector {
        let v = CVector::from_fn(dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        StateVector::new(v).unwrap().normalized().unwrap()
    }

    #[test]
    fn matrix_free_matches_dense_n6() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sys = SpinSystem::spin_half(6).unwrap();
        for _ in 0..10 {
            let e = random_expr(&mut rng, &sys, 12);
            let psi = random_state(&mut rng, sys.dim());
            let dense = embed(&e, &sys).unwrap();
            let want = dense.matrix() * psi.amplitudes();
            let got = apply(&e, &sys, &psi).unwrap();
            let scale = want.norm().max(1.0);
            assert!((got.amplitudes() - want).norm() <= 1e-12 * scale);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn matrix_free_matches_dense_mixed_spins(seed in 0u64..10_000, n in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spins = (0..n).map(|_| Spin::from_twice(rng.gen_range(1..4)).unwrap()).collect();
            let sys = SpinSystem::new(spins).unwrap();
            let e = random_expr(&mut rng, &sys, 6);
            let psi = random_state(&mut rng, sys.dim());
            let want = embed(&e, &sys).unwrap().matrix() * psi.amplitudes();
            let got = apply(&e, &sys, &psi).unwrap();
            prop_assert!((got.amplitudes() - &want).norm() <= 1e-12 * want.norm().max(1.0));
        }
    }
}
