//! Rotational invariance of internal interactions.
//!
//! Two independent routes: the numeric one embeds `[H', Σ_i S_i^α]` and
//! measures its Frobenius norm; the structural one evaluates the (c1)/(c2)
//! linear conditions on an order-2 coupling tensor over spin-1/2 sites.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{embed_with_cap, Axis, OperatorExpr, SpinSystem};
use crate::error::{Error, Result};
use crate::model::{build_interaction, total_spin_components, CouplingTensor, InteractionSpec, Schedule};
use crate::tolerances::{NUMERIC_SYMMETRY_TOL_PER_DIM, STRUCTURAL_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct NumericReport {
    /// `max_t ‖[H'(t), Σ_i S_i^α]‖_F` for α = 1, 2, 3.
    pub norms: [f64; 3],
    pub samples: Vec<(f64, [f64; 3])>,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuralVerdict {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for StructuralVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructuralVerdict::Pass => "pass",
            StructuralVerdict::Fail => "fail",
            StructuralVerdict::NotApplicable => "not-applicable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    C1,
    C2,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::C1 => "c1",
            Condition::C2 => "c2",
        })
    }
}

/// A nonzero residual of (c1) or (c2). Positions `j, k` are 1-based tensor
/// slots; `beta`/`gamma` are absent for (c1).
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: Condition,
    pub j: usize,
    pub k: usize,
    pub site_j: usize,
    pub site_k: usize,
    pub beta: Option<Axis>,
    pub gamma: Option<Axis>,
    pub mu: Axis,
    pub nu: Axis,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralReport {
    pub verdict: StructuralVerdict,
    pub violations: Vec<Violation>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub numeric: NumericReport,
    pub structural: StructuralReport,
}

impl SymmetryReport {
    pub fn numeric_pass(&self) -> bool {
        self.numeric.pass
    }
}

/// `‖[H', Σ_i S_i^α]‖_F` for the three axes.
pub fn commutator_norms(hprime: &OperatorExpr, sys: &SpinSystem, cap: usize) -> Result<[f64; 3]> {
    if sys.dim() > cap {
        return Err(Error::Capacity { dim: sys.dim(), cap });
    }
    let totals = total_spin_components(sys);
    let mut out = [0.0; 3];
    for (a, total) in totals.iter().enumerate() {
        let c = hprime.commutator(total, sys)?;
        out[a] = embed_with_cap(&c, sys, cap)?.frobenius_norm();
    }
    Ok(out)
}

pub fn numeric_tolerance(sys: &SpinSystem) -> f64 {
    NUMERIC_SYMMETRY_TOL_PER_DIM * sys.dim() as f64
}

/// Numeric invariance of `H'(t)` at the sampled times.
pub fn numeric_invariance_check(
    spec: &InteractionSpec,
    sys: &SpinSystem,
    t_samples: &[f64],
    cap: usize,
) -> Result<NumericReport> {
    if t_samples.is_empty() {
        return Err(Error::domain("numeric invariance check needs at least one time sample"));
    }
    spec.validate(sys)?;
    let mut norms = [0.0f64; 3];
    let mut samples = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let hp = build_interaction(spec, t)?;
        let n = commutator_norms(&hp, sys, cap)?;
        for a in 0..3 {
            norms[a] = norms[a].max(n[a]);
        }
        samples.push((t, n));
    }
    let tolerance = numeric_tolerance(sys);
    Ok(NumericReport {
        norms,
        samples,
        tolerance,
        pass: norms.iter().all(|&n| n <= tolerance),
    })
}

/// `Q̃`: slot `j` holds `(site_j, axis_j)`, slot `k` holds `(site_k, axis_k)`.
fn q_tilde(q: &CouplingTensor, j: usize, site_j: usize, site_k: usize, axis_j: Axis, axis_k: Axis) -> f64 {
    if j == 1 {
        q.get2(site_j, site_k, axis_j, axis_k)
    } else {
        q.get2(site_k, site_j, axis_k, axis_j)
    }
}

fn delta(a: Axis, b: Axis) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Residual of (c2) at one index assignment (`i_j ≠ i_k`).
pub fn c2_residual(
    q: &CouplingTensor,
    j: usize,
    site_j: usize,
    site_k: usize,
    beta: Axis,
    gamma: Axis,
    mu: Axis,
    nu: Axis,
) -> f64 {
    let pair = |a: Axis, b: Axis| q_tilde(q, j, site_j, site_k, a, b) + q_tilde(q, j, site_k, site_j, b, a);
    delta(mu, gamma) * pair(beta, nu) + delta(nu, gamma) * pair(mu, beta)
        - delta(mu, beta) * pair(gamma, nu)
        - delta(nu, beta) * pair(mu, gamma)
}

/// Exhaustive (c1)/(c2) evaluation for an order-2 tensor on spin-1/2 sites.
/// Violations come out in lexicographic order of `(j, k, i_j, i_k, β, γ, μ, ν)`.
pub fn structural_check(tensor: &CouplingTensor, sys: &SpinSystem) -> Result<StructuralReport> {
    tensor.check_sites(sys)?;
    if tensor.order() != 2 {
        return Ok(StructuralReport {
            verdict: StructuralVerdict::NotApplicable,
            violations: Vec::new(),
            reason: Some(format!("tensor order {} (conditions cover order 2)", tensor.order())),
        });
    }
    if !sys.all_spin_half() {
        return Ok(StructuralReport {
            verdict: StructuralVerdict::NotApplicable,
            violations: Vec::new(),
            reason: Some("conditions assume spin-1/2 sites".into()),
        });
    }
    let n = sys.n_sites();
    let mut violations = Vec::new();
    for (j, k) in [(1usize, 2usize), (2, 1)] {
        for site_j in 0..n {
            for site_k in 0..n {
                if site_j == site_k {
                    for mu in Axis::ALL {
                        for nu in Axis::ALL {
                            let r = q_tilde(tensor, j, site_j, site_k, mu, nu)
                                - q_tilde(tensor, j, site_j, site_k, nu, mu);
                            if r.abs() > STRUCTURAL_TOL {
                                violations.push(Violation {
                                    condition: Condition::C1,
                                    j,
                                    k,
                                    site_j,
                                    site_k,
                                    beta: None,
                                    gamma: None,
                                    mu,
                                    nu,
                                    residual: r,
                                });
                            }
                        }
                    }
                    continue;
                }
                for beta in Axis::ALL {
                    for gamma in Axis::ALL {
                        for mu in Axis::ALL {
                            for nu in Axis::ALL {
                                let r = c2_residual(tensor, j, site_j, site_k, beta, gamma, mu, nu);
                                if r.abs() > STRUCTURAL_TOL {
                                    violations.push(Violation {
                                        condition: Condition::C2,
                                        j,
                                        k,
                                        site_j,
                                        site_k,
                                        beta: Some(beta),
                                        gamma: Some(gamma),
                                        mu,
                                        nu,
                                        residual: r,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let verdict = if violations.is_empty() {
        StructuralVerdict::Pass
    } else {
        StructuralVerdict::Fail
    };
    Ok(StructuralReport {
        verdict,
        violations,
        reason: None,
    })
}

/// Both checks on a time-independent tensor with `λ = 1`.
pub fn check_tensor(tensor: &CouplingTensor, sys: &SpinSystem, cap: usize) -> Result<SymmetryReport> {
    let spec = InteractionSpec::single(tensor.clone(), Schedule::Constant(1.0));
    Ok(SymmetryReport {
        numeric: numeric_invariance_check(&spec, sys, &[0.0], cap)?,
        structural: structural_check(tensor, sys)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossCase {
    pub structural_pass: bool,
    pub numeric_pass: bool,
    pub max_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub cases: Vec<CrossCase>,
}

impl CrossValidation {
    pub fn agree(&self) -> bool {
        self.cases.iter().all(|c| c.structural_pass == c.numeric_pass)
    }
}

/// Random sparse perturbation of an order-2 tensor. Mixes entries that keep
/// rotational invariance (isotropic pair couplings, symmetric same-site
/// entries) with arbitrary single entries.
pub fn perturb(tensor: &CouplingTensor, n_sites: usize, rng: &mut impl Rng) -> Result<CouplingTensor> {
    let mut out = tensor.clone();
    let edits = rng.gen_range(1..=3);
    for _ in 0..edits {
        let v = rng.gen_range(0.1..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let i = rng.gen_range(0..n_sites);
        let j = rng.gen_range(0..n_sites);
        match rng.gen_range(0..3) {
            0 => {
                for a in Axis::ALL {
                    out.accumulate(vec![i, j], vec![a, a], v)?;
                }
            }
            1 => {
                let a = Axis::from_index(rng.gen_range(0..3));
                let b = Axis::from_index(rng.gen_range(0..3));
                out.accumulate(vec![i, i], vec![a, b], v)?;
                if a != b {
                    out.accumulate(vec![i, i], vec![b, a], v)?;
                }
            }
            _ => {
                let a = Axis::from_index(rng.gen_range(0..3));
                let b = Axis::from_index(rng.gen_range(0..3));
                out.accumulate(vec![i, j], vec![a, b], v)?;
            }
        }
    }
    Ok(out)
}

/// Structural verdict vs numeric verdict on `tensor` and on `trials` random
/// perturbations of it (seeded, deterministic).
pub fn cross_validate(
    tensor: &CouplingTensor,
    sys: &SpinSystem,
    trials: usize,
    seed: u64,
    cap: usize,
) -> Result<CrossValidation> {
    if tensor.order() != 2 || !sys.all_spin_half() {
        return Err(Error::domain("cross validation needs an order-2 tensor on spin-1/2 sites"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(trials + 1);
    let mut current = tensor.clone();
    for trial in 0..=trials {
        if trial > 0 {
            current = perturb(tensor, sys.n_sites(), &mut rng)?;
        }
        let report = check_tensor(&current, sys, cap)?;
        cases.push(CrossCase {
            structural_pass: report.structural.verdict == StructuralVerdict::Pass,
            numeric_pass: report.numeric.pass,
            max_norm: report.numeric.norms.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok(CrossValidation { cases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Spin;
    use crate::model::heisenberg_tensor;
    use crate::tolerances::DENSE_CAP;

    pub(crate) fn xxz_tensor(pairs: &[(usize, usize)], delta: f64) -> CouplingTensor {
        let mut q = CouplingTensor::new(2).unwrap();
        for &(i, j) in pairs {
            q.insert(vec![i, j], vec![Axis::X, Axis::X], 1.0).unwrap();
            q.insert(vec![i, j], vec![Axis::Y, Axis::Y], 1.0).unwrap();
            q.insert(vec![i, j], vec![Axis::Z, Axis::Z], delta).unwrap();
        }
        q
    }

    fn chain(n: usize) -> Vec<(usize, usize)> {
        (0..n - 1).map(|i| (i, i + 1)).collect()
    }

    #[test]
    fn heisenberg_passes_numeric_for_chains() {
        for n in 2..=6 {
            let sys = SpinSystem::spin_half(n).unwrap();
            let spec = InteractionSpec::single(heisenberg_tensor(&chain(n)).unwrap(), Schedule::Constant(-1.0));
            let r = numeric_invariance_check(&spec, &sys, &[0.0, 1.0], DENSE_CAP).unwrap();
            assert!(r.norms.iter().all(|&x| x <= 1e-13), "n={n} {:?}", r.norms);
            assert!(r.pass);
        }
    }

    #[test]
    fn xxz_breaks_transverse_rotations_only() {
        // Oracle: dense 4×4 commutators assembled from single-site matrices.
        use crate::algebra::{single_spin_matrix, DenseOperator};
        let sys = SpinSystem::spin_half(2).unwrap();
        let s: Vec<_> = Axis::ALL
            .iter()
            .map(|&a| single_spin_matrix(Spin::HALF, a).into_matrix())
            .collect();
        let id = crate::CMatrix::identity(2, 2);
        let mut h = crate::CMatrix::zeros(4, 4);
        for (a, w) in [1.0, 1.0, 2.0].iter().enumerate() {
            h += s[a].kronecker(&s[a]) * crate::C64::new(*w, 0.0);
        }
        let mut oracle = [0.0; 3];
        for a in 0..3 {
            let tot = s[a].kronecker(&id) + id.kronecker(&s[a]);
            oracle[a] = DenseOperator::new(&h * &tot - &tot * &h).unwrap().frobenius_norm();
        }
        let spec = InteractionSpec::single(xxz_tensor(&[(0, 1)], 2.0), Schedule::Constant(1.0));
        let r = numeric_invariance_check(&spec, &sys, &[0.0], DENSE_CAP).unwrap();
        for a in 0..3 {
            assert!((r.norms[a] - oracle[a]).abs() < 1e-14);
        }
        assert!(r.norms[0] > 0.1 && r.norms[1] > 0.1);
        assert!(r.norms[2] <= 1e-13);
        assert!(!r.pass);
    }

    #[test]
    fn zero_interaction_has_zero_norms() {
        let sys = SpinSystem::spin_half(3).unwrap();
        let r = numeric_invariance_check(&InteractionSpec::none(), &sys, &[0.0], DENSE_CAP).unwrap();
        assert_eq!(r.norms, [0.0; 3]);
        let s = structural_check(&CouplingTensor::new(2).unwrap(), &sys).unwrap();
        assert_eq!(s.verdict, StructuralVerdict::Pass);
    }

    #[test]
    fn heisenberg_passes_structural() {
        let sys = SpinSystem::spin_half(4).unwrap();
        let r = structural_check(&heisenberg_tensor(&chain(4)).unwrap(), &sys).unwrap();
        assert_eq!(r.verdict, StructuralVerdict::Pass);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn xxz_fails_structural_on_c2() {
        let sys = SpinSystem::spin_half(2).unwrap();
        let r = structural_check(&xxz_tensor(&[(0, 1)], 2.0), &sys).unwrap();
        assert_eq!(r.verdict, StructuralVerdict::Fail);
        assert!(r.violations.iter().all(|v| v.condition == Condition::C2));
        // μ = γ = 1, β = ν = 3 picks up P³³ − P¹¹ = 2 − 1.
        let v = r
            .violations
            .iter()
            .find(|v| v.j == 1 && v.site_j == 0 && v.mu == Axis::X && v.gamma == Some(Axis::X) && v.beta == Some(Axis::Z) && v.nu == Axis::Z)
            .unwrap();
        assert!((v.residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn violations_are_lexicographic() {
        let sys = SpinSystem::spin_half(3).unwrap();
        let r = structural_check(&xxz_tensor(&[(0, 1), (1, 2)], 1.5), &sys).unwrap();
        let keys: Vec<_> = r
            .violations
            .iter()
            .map(|v| (v.j, v.k, v.site_j, v.site_k, v.beta, v.gamma, v.mu, v.nu))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn antisymmetric_same_site_entry_violates_c1() {
        let sys = SpinSystem::spin_half(2).unwrap();
        let mut q = CouplingTensor::new(2).unwrap();
        q.insert(vec![1, 1], vec![Axis::X, Axis::Y], 0.5).unwrap();
        let r = structural_check(&q, &sys).unwrap();
        assert_eq!(r.verdict, StructuralVerdict::Fail);
        assert!(r.violations.iter().any(|v| v.condition == Condition::C1));
    }

    #[test]
    fn not_applicable_cases() {
        let sys1 = SpinSystem::uniform(2, Spin::ONE).unwrap();
        let q = heisenberg_tensor(&[(0, 1)]).unwrap();
        assert_eq!(structural_check(&q, &sys1).unwrap().verdict, StructuralVerdict::NotApplicable);
        let q4 = CouplingTensor::new(4).unwrap();
        let sys = SpinSystem::spin_half(2).unwrap();
        assert_eq!(structural_check(&q4, &sys).unwrap().verdict, StructuralVerdict::NotApplicable);
        // Numeric route still works for spin 1.
        let spec = InteractionSpec::single(q, Schedule::Constant(1.0));
        let r = numeric_invariance_check(&spec, &sys1, &[0.0], DENSE_CAP).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn numeric_capacity_error() {
        let sys = SpinSystem::spin_half(4).unwrap();
        let spec = InteractionSpec::single(heisenberg_tensor(&chain(4)).unwrap(), Schedule::Constant(1.0));
        assert!(matches!(
            numeric_invariance_check(&spec, &sys, &[0.0], 8),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn cross_validation_heisenberg() {
        let sys = SpinSystem::spin_half(4).unwrap();
        let cv = cross_validate(&heisenberg_tensor(&chain(4)).unwrap(), &sys, 50, 7, DENSE_CAP).unwrap();
        assert_eq!(cv.cases.len(), 51);
        assert!(cv.agree());
        assert!(cv.cases.iter().any(|c| c.structural_pass) && cv.cases.iter().any(|c| !c.structural_pass));
    }

    #[test]
    fn single_off_diagonal_entry_fails_both() {
        let sys = SpinSystem::spin_half(2).unwrap();
        let mut q = CouplingTensor::new(2).unwrap();
        q.insert(vec![0, 1], vec![Axis::X, Axis::Y], 1.0).unwrap();
        let r = check_tensor(&q, &sys, DENSE_CAP).unwrap();
        assert_eq!(r.structural.verdict, StructuralVerdict::Fail);
        assert!(!r.numeric.pass);
    }

    #[test]
    fn isotropic_random_tensors_pass_both() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sys = SpinSystem::spin_half(5).unwrap();
        for _ in 0..10 {
            let mut q = CouplingTensor::new(2).unwrap();
            for i in 0..5 {
                for j in (i + 1)..5 {
                    if rng.gen_bool(0.5) {
                        let c = rng.gen_range(-1.0..1.0);
                        for a in Axis::ALL {
                            q.insert(vec![i, j], vec![a, a], c).unwrap();
                            q.insert(vec![j, i], vec![a, a], c).unwrap();
                        }
                    }
                }
            }
            let r = check_tensor(&q, &sys, DENSE_CAP).unwrap();
            assert_eq!(r.structural.verdict, StructuralVerdict::Pass);
            assert!(r.numeric.norms.iter().all(|&x| x <= 1e-12));
        }
    }
}
