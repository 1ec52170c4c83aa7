use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::algebra::dense::DenseOperator;
use crate::algebra::spin::{levi_civita, Axis, SpinSystem};
use crate::error::{Error, Result};
use crate::tolerances::TERM_EPSILON;
use crate::C64;

/// Single-site spin operator `S_i^α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinFactor {
    pub site: usize,
    pub axis: Axis,
}

impl SpinFactor {
    pub fn new(site: usize, axis: Axis) -> Self {
        SpinFactor { site, axis }
    }
}

impl fmt::Display for SpinFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}^{}", self.site, self.axis)
    }
}

/// `coeff · F₁F₂⋯F_k`; an empty factor list is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub factors: Vec<SpinFactor>,
}

impl Term {
    pub fn new(coeff: C64, factors: Vec<SpinFactor>) -> Self {
        Term { coeff, factors }
    }
}

/// Weighted sum of ordered products of single-site spin operators.
///
/// Factor order inside a term is semantic: factors on distinct sites commute,
/// factors on the same site do not.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OperatorExpr {
    terms: Vec<Term>,
}

impl OperatorExpr {
    pub fn zero() -> Self {
        OperatorExpr { terms: Vec::new() }
    }

    pub fn identity(coeff: C64) -> Self {
        OperatorExpr::from_terms(vec![Term::new(coeff, Vec::new())])
    }

    /// `S_site^axis`.
    pub fn spin(site: usize, axis: Axis) -> Self {
        OperatorExpr::from_terms(vec![Term::new(C64::new(1.0, 0.0), vec![SpinFactor::new(site, axis)])])
    }

    /// `coeff · S_{i₁}^{α₁}⋯S_{i_k}^{α_k}`.
    pub fn product(coeff: C64, factors: Vec<SpinFactor>) -> Self {
        OperatorExpr::from_terms(vec![Term::new(coeff, factors)])
    }

    /// `Σ_i S_i^α` over `n_sites` sites.
    pub fn total_spin(n_sites: usize, axis: Axis) -> Self {
        OperatorExpr::from_terms(
            (0..n_sites)
                .map(|i| Term::new(C64::new(1.0, 0.0), vec![SpinFactor::new(i, axis)]))
                .collect(),
        )
    }

    /// `v·Σ_i S_i`.
    pub fn vector_dot_total_spin(v: [f64; 3], n_sites: usize) -> Self {
        let mut terms = Vec::with_capacity(3 * n_sites);
        for i in 0..n_sites {
            for a in Axis::ALL {
                terms.push(Term::new(C64::new(v[a.index()], 0.0), vec![SpinFactor::new(i, a)]));
            }
        }
        OperatorExpr::from_terms(terms).canonicalized()
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        OperatorExpr { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_site(&self) -> Option<usize> {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|f| f.site))
            .max()
    }

    pub fn check_sites(&self, sys: &SpinSystem) -> Result<()> {
        match self.max_site() {
            Some(s) => sys.check_site(s),
            None => Ok(()),
        }
    }

    pub fn push(&mut self, term: Term) {
        self.terms.push(term);
    }

    pub fn scale(&self, c: C64) -> Self {
        OperatorExpr::from_terms(
            self.terms
                .iter()
                .map(|t| Term::new(t.coeff * c, t.factors.clone()))
                .collect(),
        )
    }

    /// Hermitian adjoint: reversed factor order, conjugated coefficients.
    pub fn adjoint(&self) -> Self {
        OperatorExpr::from_terms(
            self.terms
                .iter()
                .map(|t| {
                    let mut f = t.factors.clone();
                    f.reverse();
                    Term::new(t.coeff.conj(), f)
                })
                .collect(),
        )
    }

    /// Merges identical factor sequences and drops coefficients below `eps`.
    /// Terms keep the order of first appearance.
    pub fn canonicalize(&self, eps: f64) -> Self {
        let mut index: HashMap<&[SpinFactor], usize> = HashMap::new();
        let mut merged: Vec<Term> = Vec::new();
        for t in &self.terms {
            match index.get(t.factors.as_slice()) {
                Some(&k) => merged[k].coeff += t.coeff,
                None => {
                    index.insert(t.factors.as_slice(), merged.len());
                    merged.push(t.clone());
                }
            }
        }
        merged.retain(|t| t.coeff.norm() >= eps);
        OperatorExpr::from_terms(merged)
    }

    pub fn canonicalized(&self) -> Self {
        self.canonicalize(TERM_EPSILON)
    }

    /// Stable sort of each term's factors by site. Exact, since only factors
    /// on distinct sites change places.
    pub fn normal_ordered(&self) -> Self {
        OperatorExpr::from_terms(
            self.terms
                .iter()
                .map(|t| {
                    let mut f = t.factors.clone();
                    f.sort_by_key(|x| x.site);
                    Term::new(t.coeff, f)
                })
                .collect(),
        )
    }

    /// Normal orders and collapses same-site products with
    /// `S^a S^b = ¼δ_ab + (i/2) Σ_c ε_abc S^c`, valid for spin-1/2 only.
    pub fn reduce_spin_half(&self) -> Self {
        let mut out = Vec::new();
        let mut stack: Vec<Term> = self.normal_ordered().terms;
        while let Some(mut t) = stack.pop() {
            let pos = t.factors.windows(2).position(|w| w[0].site == w[1].site);
            match pos {
                None => out.push(t),
                Some(i) => {
                    let (a, b) = (t.factors[i].axis, t.factors[i + 1].axis);
                    if a == b {
                        t.factors.drain(i..i + 2);
                        t.coeff *= 0.25;
                    } else {
                        let c = 3 - a.index() - b.index();
                        let eps = levi_civita(a.index(), b.index(), c);
                        t.factors[i].axis = Axis::from_index(c);
                        t.factors.remove(i + 1);
                        t.coeff *= C64::new(0.0, 0.5 * eps);
                    }
                    stack.push(t);
                }
            }
        }
        out.reverse();
        OperatorExpr::from_terms(out).canonicalized()
    }

    /// Normal order, spin-1/2 reduction when the system allows it, then
    /// canonicalization.
    pub fn simplified(&self, sys: &SpinSystem) -> Self {
        if sys.all_spin_half() {
            self.reduce_spin_half()
        } else {
            self.normal_ordered().canonicalized()
        }
    }

    /// `[self, other]`, simplified for `sys`.
    pub fn commutator(&self, other: &OperatorExpr, sys: &SpinSystem) -> Result<OperatorExpr> {
        self.check_sites(sys)?;
        other.check_sites(sys)?;
        let ab = self.clone() * other.clone();
        let ba = other.clone() * self.clone();
        Ok((ab - ba).simplified(sys))
    }

    /// `self − self†` vanishes after simplification.
    pub fn is_formally_hermitian(&self, sys: &SpinSystem) -> bool {
        (self.clone() - self.adjoint()).simplified(sys).is_zero()
    }
}

impl Add for OperatorExpr {
    type Output = OperatorExpr;
    fn add(mut self, rhs: OperatorExpr) -> OperatorExpr {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Sub for OperatorExpr {
    type Output = OperatorExpr;
    fn sub(self, rhs: OperatorExpr) -> OperatorExpr {
        self + rhs.scale(C64::new(-1.0, 0.0))
    }
}

impl Neg for OperatorExpr {
    type Output = OperatorExpr;
    fn neg(self) -> OperatorExpr {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for OperatorExpr {
    type Output = OperatorExpr;
    fn mul(self, rhs: OperatorExpr) -> OperatorExpr {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                let mut f = a.factors.clone();
                f.extend_from_slice(&b.factors);
                terms.push(Term::new(a.coeff * b.coeff, f));
            }
        }
        OperatorExpr::from_terms(terms)
    }
}

impl Mul<C64> for OperatorExpr {
    type Output = OperatorExpr;
    fn mul(self, rhs: C64) -> OperatorExpr {
        self.scale(rhs)
    }
}

impl Mul<f64> for OperatorExpr {
    type Output = OperatorExpr;
    fn mul(self, rhs: f64) -> OperatorExpr {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl fmt::Display for OperatorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({})", t.coeff)?;
            for fac in &t.factors {
                write!(f, "·{fac}")?;
            }
        }
        Ok(())
    }
}

/// Either representation, for APIs that accept both.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Symbolic(OperatorExpr),
    Dense(DenseOperator),
}

/// `ab − ba` in the representation of the inputs; mixing the two is an error.
pub fn commutator(a: &Operator, b: &Operator, sys: &SpinSystem) -> Result<Operator> {
    match (a, b) {
        (Operator::Symbolic(x), Operator::Symbolic(y)) => Ok(Operator::Symbolic(x.commutator(y, sys)?)),
        (Operator::Dense(x), Operator::Dense(y)) => {
            if x.dim() != sys.dim() {
                return Err(Error::Dimension {
                    expected: sys.dim(),
                    found: x.dim(),
                });
            }
            Ok(Operator::Dense(x.commutator(y)?))
        }
        _ => Err(Error::domain(
            "commutator of a symbolic and a dense operator; convert one side first",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Spin;

    fn s(site: usize, label: u8) -> OperatorExpr {
        OperatorExpr::spin(site, Axis::from_label(label).unwrap())
    }

    #[test]
    fn su2_commutator_symbolic() {
        let sys = SpinSystem::spin_half(1).unwrap();
        let c = s(0, 1).commutator(&s(0, 2), &sys).unwrap();
        assert_eq!(c, s(0, 3).scale(C64::i()));
    }

    #[test]
    fn distinct_sites_commute() {
        let sys = SpinSystem::spin_half(2).unwrap();
        assert!(s(0, 1).commutator(&s(1, 2), &sys).unwrap().is_zero());
        // Also without spin-1/2 reduction.
        let sys1 = SpinSystem::uniform(2, Spin::ONE).unwrap();
        assert!(s(0, 1).commutator(&s(1, 2), &sys1).unwrap().is_zero());
    }

    #[test]
    fn self_commutator_vanishes() {
        let sys = SpinSystem::spin_half(3).unwrap();
        let a = s(0, 1) * s(1, 1) + s(2, 3).scale(C64::new(0.3, 0.0)) + s(1, 2) * s(1, 3);
        assert!(a.commutator(&a, &sys).unwrap().is_zero());
    }

    #[test]
    fn spin_half_product_identity() {
        let xx = (s(0, 1) * s(0, 1)).reduce_spin_half();
        assert_eq!(xx, OperatorExpr::identity(C64::new(0.25, 0.0)));
        let xy = (s(0, 1) * s(0, 2)).reduce_spin_half();
        assert_eq!(xy, s(0, 3).scale(C64::new(0.0, 0.5)));
        let yx = (s(0, 2) * s(0, 1)).reduce_spin_half();
        assert_eq!(yx, s(0, 3).scale(C64::new(0.0, -0.5)));
    }

    #[test]
    fn canonicalization_merges_and_drops() {
        let e = s(0, 1) + s(0, 1) + s(1, 2).scale(C64::new(1e-16, 0.0));
        let c = e.canonicalized();
        assert_eq!(c.len(), 1);
        assert_eq!(c.terms()[0].coeff, C64::new(2.0, 0.0));
    }

    #[test]
    fn order_is_kept_for_general_spin() {
        let sys = SpinSystem::uniform(1, Spin::ONE).unwrap();
        let c = s(0, 1).commutator(&s(0, 2), &sys).unwrap();
        // Left as ordered products: S1S2 − S2S1.
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn hermiticity_is_formal() {
        let sys = SpinSystem::spin_half(2).unwrap();
        let h = s(0, 1) * s(1, 1) + s(0, 3);
        assert!(h.is_formally_hermitian(&sys));
        let a = s(0, 1).scale(C64::i());
        assert!(!a.is_formally_hermitian(&sys));
    }

    #[test]
    fn mixed_commutator_is_rejected() {
        let sys = SpinSystem::spin_half(1).unwrap();
        let a = Operator::Symbolic(s(0, 1));
        let b = Operator::Dense(DenseOperator::identity(2));
        assert!(matches!(commutator(&a, &b, &sys), Err(Error::Domain(_))));
        let c = commutator(&b, &b, &sys).unwrap();
        match c {
            Operator::Dense(d) => assert_eq!(d.frobenius_norm(), 0.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn out_of_range_site() {
        let sys = SpinSystem::spin_half(2).unwrap();
        assert!(s(2, 1).commutator(&s(0, 1), &sys).is_err());
    }
}
