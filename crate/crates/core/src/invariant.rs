//! Dynamical invariants of the dipole Hamiltonian and their transport.
//!
//! Inserting `I = R·Σ_i S_i` into `dI/dt = i[I, H]` with `H = B·Σ_i S_i` and
//! `[S^a, S^b] = iε_abc S^c` gives `i[R·S, B·S] = (B×R)·S`, hence the
//! precession system
//!
//! ```text
//! dR/dt = B(t) × R(t)
//! ```
//!
//! which is linear, norm preserving, and integrated here with classical RK4.

use nalgebra::SymmetricEigen;

use crate::algebra::{embed_with_cap, DenseOperator, OperatorExpr, SpinSystem};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{build_interaction, total_spin_components, CouplingTensor, FieldProfile, InteractionSpec, Schedule};
use crate::propagate::UnitaryPath;
use crate::tolerances::{HERMITIAN_TOL, UNITARY_TOL};
use crate::{CMatrix, Vec3, C64};

/// Right-hand side of the precession system.
pub fn precession_rhs(b: &Vec3, r: &Vec3) -> Vec3 {
    b.cross(r)
}

fn rk4_step(field: &FieldProfile, t: f64, r: &Vec3, dt: f64) -> Result<Vec3> {
    let b0 = field.eval(t)?;
    let bm = field.eval(t + 0.5 * dt)?;
    let b1 = field.eval(t + dt)?;
    let k1 = precession_rhs(&b0, r);
    let k2 = precession_rhs(&bm, &(r + k1 * (0.5 * dt)));
    let k3 = precession_rhs(&bm, &(r + k2 * (0.5 * dt)));
    let k4 = precession_rhs(&b1, &(r + k3 * dt));
    Ok(r + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

fn rk4_span(field: &FieldProfile, t0: f64, t1: f64, r: &Vec3, steps: usize) -> Result<Vec3> {
    let dt = (t1 - t0) / steps as f64;
    let mut out = *r;
    for s in 0..steps {
        out = rk4_step(field, t0 + s as f64 * dt, &out, dt)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RSolveOptions {
    /// RK4 steps per grid interval.
    pub substeps: usize,
    /// Also integrate with doubled resolution and report the difference.
    pub step_doubling: bool,
}

impl Default for RSolveOptions {
    fn default() -> Self {
        RSolveOptions {
            substeps: 1,
            step_doubling: true,
        }
    }
}

/// `R(t)` on a grid, together with the field that transports it so the
/// trajectory can be continued locally off the grid.
#[derive(Debug, Clone)]
pub struct RTrajectory {
    grid: TimeGrid,
    values: Vec<Vec3>,
    field: FieldProfile,
    substeps: usize,
    error_estimate: Option<f64>,
}

impl RTrajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn initial(&self) -> Vec3 {
        self.values[0]
    }

    pub fn field(&self) -> &FieldProfile {
        &self.field
    }

    /// Richardson-style estimate `max_k |R_h − R_{h/2}| / 15`, when computed.
    pub fn error_estimate(&self) -> Option<f64> {
        self.error_estimate
    }

    /// `max_k |‖R(t_k)‖ − ‖R(0)‖| / ‖R(0)‖`.
    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.values[0].norm();
        self.values
            .iter()
            .map(|r| (r.norm() - n0).abs() / n0)
            .fold(0.0, f64::max)
    }

    /// Linear interpolation between nodes, renormalized to `‖R(0)‖`.
    pub fn at(&self, t: f64) -> Result<Vec3> {
        let k = self.grid.segment(t)?;
        let times = self.grid.times();
        if k + 1 == times.len() {
            return Ok(self.values[k]);
        }
        let w = (t - times[k]) / (times[k + 1] - times[k]);
        let r = self.values[k] * (1.0 - w) + self.values[k + 1] * w;
        let n = r.norm();
        if n == 0.0 {
            return Err(Error::domain("interpolated R vanished"));
        }
        Ok(r * (self.values[0].norm() / n))
    }

    /// `R(t)` by integrating from the nearest node, at the resolution used
    /// for the trajectory itself. Accurate to RK4 local error, so suitable
    /// for finite differences at spacings below the grid spacing.
    pub fn flow_to(&self, t: f64) -> Result<Vec3> {
        let k = self.grid.nearest(t)?;
        let tk = self.grid.times()[k];
        if t == tk {
            return Ok(self.values[k]);
        }
        let h = self.grid.min_spacing() / self.substeps as f64;
        let steps = ((t - tk).abs() / h).ceil().max(1.0) as usize;
        rk4_span(&self.field, tk, t, &self.values[k], steps)
    }
}

pub fn solve_r_vector(field: &FieldProfile, r0: Vec3, grid: &TimeGrid) -> Result<RTrajectory> {
    solve_r_vector_with(field, r0, grid, &RSolveOptions::default())
}

pub fn solve_r_vector_with(field: &FieldProfile, r0: Vec3, grid: &TimeGrid, opts: &RSolveOptions) -> Result<RTrajectory> {
    if !r0.iter().all(|x| x.is_finite()) {
        return Err(Error::domain("R(0) must be finite"));
    }
    if r0.norm() == 0.0 {
        return Err(Error::domain("R(0) = 0 gives the trivial invariant"));
    }
    if opts.substeps == 0 {
        return Err(Error::domain("substeps must be at least 1"));
    }
    let (lo, hi) = field.domain();
    if grid.start() < lo || grid.end() > hi {
        return Err(Error::domain(format!(
            "grid [{}, {}] leaves the field domain [{lo}, {hi}]",
            grid.start(),
            grid.end()
        )));
    }
    let times = grid.times();
    let mut values = Vec::with_capacity(times.len());
    values.push(r0);
    let mut fine = r0;
    let mut err = 0.0f64;
    for w in times.windows(2) {
        let r = rk4_span(field, w[0], w[1], values.last().unwrap(), opts.substeps)?;
        if opts.step_doubling {
            fine = rk4_span(field, w[0], w[1], &fine, 2 * opts.substeps)?;
            err = err.max((r - fine).norm() / 15.0);
        }
        values.push(r);
    }
    Ok(RTrajectory {
        grid: grid.clone(),
        values,
        field: field.clone(),
        substeps: opts.substeps,
        error_estimate: opts.step_doubling.then_some(err),
    })
}

/// `R(t)·Σ_i S_i` at `t` (linear interpolation between nodes).
pub fn assemble_invariant(r: &RTrajectory, sys: &SpinSystem, t: f64) -> Result<OperatorExpr> {
    let v = r.at(t)?;
    Ok(OperatorExpr::vector_dot_total_spin([v[0], v[1], v[2]], sys.n_sites()))
}

/// Dense `Σ_i S_i^α`, α = 1, 2, 3.
#[derive(Debug, Clone)]
pub struct TotalSpinMatrices {
    m: [DenseOperator; 3],
}

impl TotalSpinMatrices {
    pub fn new(sys: &SpinSystem, cap: usize) -> Result<Self> {
        let [a, b, c] = total_spin_components(sys);
        Ok(TotalSpinMatrices {
            m: [
                embed_with_cap(&a, sys, cap)?,
                embed_with_cap(&b, sys, cap)?,
                embed_with_cap(&c, sys, cap)?,
            ],
        })
    }

    pub fn component(&self, axis: usize) -> &DenseOperator {
        &self.m[axis]
    }

    /// `v·Σ_i S_i`.
    pub fn dot(&self, v: &Vec3) -> Result<DenseOperator> {
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::domain("non-finite vector"));
        }
        let mut out = self.m[0].matrix() * C64::new(v[0], 0.0);
        out += self.m[1].matrix() * C64::new(v[1], 0.0);
        out += self.m[2].matrix() * C64::new(v[2], 0.0);
        Ok(DenseOperator::new_hermitian_unchecked(out))
    }
}

/// Normalized LvN residual at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// `‖dI/dt − i[I, H]‖_F / ‖I‖_F`.
    pub value: f64,
    /// A one-sided stencil was used because `t ± dt` left the domain.
    pub one_sided: bool,
}

/// `‖(I(t+dt) − I(t−dt))/(2dt) − i[I(t), H(t)]‖_F / ‖I(t)‖_F`.
///
/// `domain` bounds the times at which `i_of_t` may be evaluated; near its
/// ends the second-order one-sided stencil
/// `(−3I(t) + 4I(t±dt) − I(t±2dt)) / (±2dt)` is used and flagged.
pub fn lvn_residual<I, H>(i_of_t: I, h_of_t: H, t: f64, dt_fd: f64, domain: (f64, f64)) -> Result<Residual>
where
    I: Fn(f64) -> Result<DenseOperator>,
    H: Fn(f64) -> Result<DenseOperator>,
{
    if !(dt_fd.is_finite() && dt_fd > 0.0) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    if t < domain.0 || t > domain.1 {
        return Err(Error::domain(format!("t = {t} outside [{}, {}]", domain.0, domain.1)));
    }
    let slack = 1e-12 * (1.0 + t.abs());
    let i_t = i_of_t(t)?;
    let h_t = h_of_t(t)?;
    if i_t.dim() != h_t.dim() {
        return Err(Error::Dimension {
            expected: i_t.dim(),
            found: h_t.dim(),
        });
    }
    let (deriv, one_sided) = if t - dt_fd >= domain.0 - slack && t + dt_fd <= domain.1 + slack {
        let plus = i_of_t(t + dt_fd)?;
        let minus = i_of_t(t - dt_fd)?;
        ((plus.matrix() - minus.matrix()) / C64::new(2.0 * dt_fd, 0.0), false)
    } else {
        let s = if t - dt_fd < domain.0 - slack { 1.0 } else { -1.0 };
        if (s > 0.0 && t + 2.0 * dt_fd > domain.1 + slack) || (s < 0.0 && t - 2.0 * dt_fd < domain.0 - slack) {
            return Err(Error::domain("domain too short for the finite-difference step"));
        }
        let i1 = i_of_t(t + s * dt_fd)?;
        let i2 = i_of_t(t + 2.0 * s * dt_fd)?;
        let num = i_t.matrix() * C64::new(-3.0, 0.0) + i1.matrix() * C64::new(4.0, 0.0) - i2.matrix();
        (num / C64::new(2.0 * s * dt_fd, 0.0), true)
    };
    let comm = (i_t.matrix() * h_t.matrix() - h_t.matrix() * i_t.matrix()) * C64::new(0.0, 1.0);
    let scale = i_t.frobenius_norm();
    if scale == 0.0 {
        return Err(Error::domain("LvN residual of a vanishing operator"));
    }
    Ok(Residual {
        value: (deriv - comm).norm() / scale,
        one_sided,
    })
}

/// Initial invariant `I(0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InvariantChoice {
    /// `R(0)·Σ_i S_i`.
    RVector(Vec3),
    /// `Σ_i S_i³ + H₁` with `H₁` built from the coupling tensor.
    Yan(CouplingTensor),
    /// Any Hermitian operator.
    Custom(OperatorExpr),
}

pub fn initial_invariant(choice: &InvariantChoice, sys: &SpinSystem, cap: usize) -> Result<DenseOperator> {
    let expr = match choice {
        InvariantChoice::RVector(r) => {
            if r.norm() == 0.0 {
                return Err(Error::domain("R(0) = 0 gives the trivial invariant"));
            }
            OperatorExpr::vector_dot_total_spin([r[0], r[1], r[2]], sys.n_sites())
        }
        InvariantChoice::Yan(q) => {
            let spec = InteractionSpec::single(q.clone(), Schedule::Constant(1.0));
            spec.validate(sys)?;
            let [_, _, s3] = total_spin_components(sys);
            s3 + build_interaction(&spec, 0.0)?
        }
        InvariantChoice::Custom(e) => e.clone(),
    };
    let dense = embed_with_cap(&expr, sys, cap)?;
    if !dense.is_hermitian() {
        return Err(Error::domain("initial invariant must be Hermitian"));
    }
    Ok(dense)
}

fn transport(i0: &DenseOperator, u: &DenseOperator) -> Result<DenseOperator> {
    if u.dim() != i0.dim() {
        return Err(Error::Dimension {
            expected: i0.dim(),
            found: u.dim(),
        });
    }
    let defect = u.unitarity_defect();
    if defect > UNITARY_TOL {
        return Err(Error::domain(format!("transport needs a unitary (‖U†U−1‖_F = {defect:.3e})")));
    }
    let m = u.matrix() * i0.matrix() * u.matrix().adjoint();
    Ok(DenseOperator::new_hermitian_unchecked((&m + m.adjoint()) * C64::new(0.5, 0.0)))
}

/// `U(t) I(0) U(t)†` on every node of the path.
pub fn transported_invariant(choice: &InvariantChoice, sys: &SpinSystem, path: &UnitaryPath, cap: usize) -> Result<Vec<DenseOperator>> {
    let i0 = initial_invariant(choice, sys, cap)?;
    path.unitaries().iter().map(|u| transport(&i0, u)).collect()
}

/// `U(t) I(0) U(t)†` for one unitary.
pub fn transport_operator(i0: &DenseOperator, u: &DenseOperator) -> Result<DenseOperator> {
    transport(i0, u)
}

fn sorted_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// `max_t max_n |λ_n(t) − λ_n(0)|` over sorted spectra.
pub fn invariant_spectrum_drift(ops: &[DenseOperator]) -> Result<f64> {
    let first = match ops.first() {
        Some(op) => op,
        None => return Ok(0.0),
    };
    for op in ops {
        if op.dim() != first.dim() {
            return Err(Error::Dimension {
                expected: first.dim(),
                found: op.dim(),
            });
        }
        let defect = op.hermiticity_defect();
        if defect > HERMITIAN_TOL * op.frobenius_norm().max(1.0) {
            return Err(Error::domain("spectrum drift needs Hermitian operators"));
        }
    }
    let base = sorted_eigenvalues(first.matrix());
    let mut drift = 0.0f64;
    for op in &ops[1..] {
        let e = sorted_eigenvalues(op.matrix());
        for (a, b) in e.iter().zip(&base) {
            drift = drift.max((a - b).abs());
        }
    }
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{embed, Axis};
    use crate::tolerances::DENSE_CAP;
    use std::f64::consts::PI;

    #[test]
    fn zero_field_keeps_r() {
        let grid = TimeGrid::uniform(0.0, 3.0, 30).unwrap();
        let r = solve_r_vector(&FieldProfile::Constant(Vec3::zeros()), Vec3::new(0.0, 0.0, 1.0), &grid).unwrap();
        assert!(r.values().iter().all(|v| *v == Vec3::new(0.0, 0.0, 1.0)));
    }

    #[test]
    fn collinear_r_is_fixed() {
        let grid = TimeGrid::uniform(0.0, 3.0, 30).unwrap();
        let r = solve_r_vector(&FieldProfile::Constant(Vec3::new(0.0, 0.0, 2.5)), Vec3::new(0.0, 0.0, 1.0), &grid).unwrap();
        assert!(r.values().iter().all(|v| *v == Vec3::new(0.0, 0.0, 1.0)));
    }

    #[test]
    fn zero_r0_rejected() {
        let grid = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
        assert!(solve_r_vector(&FieldProfile::Constant(Vec3::zeros()), Vec3::zeros(), &grid).is_err());
    }

    #[test]
    fn transverse_precession_has_period_2pi() {
        let field = FieldProfile::Constant(Vec3::new(0.0, 0.0, 1.0));
        let grid = TimeGrid::uniform(0.0, 2.0 * PI, 2000).unwrap();
        let r = solve_r_vector(&field, Vec3::new(1.0, 0.0, 0.0), &grid).unwrap();
        assert!(r.values().iter().all(|v| v[2] == 0.0));
        assert!(r.max_norm_drift() < 1e-9);
        assert!((r.values().last().unwrap() - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-9);
        // Sign pinned by the LvN residual rather than assumed.
        let sys = SpinSystem::spin_half(1).unwrap();
        let totals = TotalSpinMatrices::new(&sys, DENSE_CAP).unwrap();
        let h = totals.dot(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let dt = grid.min_spacing() / 64.0;
        for &t in grid.times().iter().step_by(97) {
            let res = lvn_residual(
                |s| totals.dot(&r.flow_to(s)?),
                |_| Ok(h.clone()),
                t,
                dt,
                (grid.start(), grid.end()),
            )
            .unwrap();
            assert!(res.value <= 1e-9, "t={t} residual {}", res.value);
        }
        // The opposite rotation sense fails the residual.
        let wrong = |s: f64| totals.dot(&Vec3::new(s.cos(), -s.sin(), 0.0));
        let res = lvn_residual(wrong, |_| Ok(h.clone()), 1.0, 1e-4, (0.0, 2.0 * PI)).unwrap();
        assert!(res.value > 0.5);
    }

    #[test]
    fn assembled_invariant_examples() {
        let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let field = FieldProfile::Constant(Vec3::zeros());
        let sys = SpinSystem::spin_half(2).unwrap();
        let r = solve_r_vector(&field, Vec3::new(0.0, 0.0, 1.0), &grid).unwrap();
        let i = assemble_invariant(&r, &sys, 0.5).unwrap();
        assert_eq!(i, OperatorExpr::total_spin(2, Axis::Z));
        let r = solve_r_vector(&field, Vec3::new(1.0, 0.0, 0.0), &grid).unwrap();
        let one = SpinSystem::spin_half(1).unwrap();
        assert_eq!(assemble_invariant(&r, &one, 0.0).unwrap(), OperatorExpr::spin(0, Axis::X));
        assert!(assemble_invariant(&r, &one, 1.5).is_err());
    }

    #[test]
    fn assembled_spectrum_is_fixed() {
        let field = FieldProfile::rotating_cone(1.0, PI / 3.0, 0.2).unwrap();
        let grid = TimeGrid::uniform(0.0, 10.0, 200).unwrap();
        let r = solve_r_vector(&field, Vec3::new(0.3, -0.5, 0.81).normalize(), &grid).unwrap();
        assert!(r.max_norm_drift() < 1e-7);
        let sys = SpinSystem::spin_half(2).unwrap();
        for t in [0.0, 1.3, 4.05, 9.99] {
            let e = embed(&assemble_invariant(&r, &sys, t).unwrap(), &sys).unwrap().eigenvalues().unwrap();
            for (a, b) in e.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frozen_invariant_control_residual_is_one() {
        let sys = SpinSystem::spin_half(1).unwrap();
        let totals = TotalSpinMatrices::new(&sys, DENSE_CAP).unwrap();
        let s1 = totals.component(0).clone();
        let h = totals.component(2).clone();
        let res = lvn_residual(|_| Ok(s1.clone()), |_| Ok(h.clone()), 0.5, 0.01, (0.0, 1.0)).unwrap();
        assert!((res.value - 1.0).abs() < 1e-14);
        assert!(!res.one_sided);
        let res = lvn_residual(|_| Ok(s1.clone()), |_| Ok(h.clone()), 0.0, 0.01, (0.0, 1.0)).unwrap();
        assert!(res.one_sided);
    }

    #[test]
    fn one_sided_stencil_is_second_order() {
        let sys = SpinSystem::spin_half(1).unwrap();
        let totals = TotalSpinMatrices::new(&sys, DENSE_CAP).unwrap();
        let h = totals.dot(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let exact = |s: f64| totals.dot(&Vec3::new(s.cos(), s.sin(), 0.0));
        let r1 = lvn_residual(exact, |_| Ok(h.clone()), 0.0, 1e-2, (0.0, 1.0)).unwrap();
        let r2 = lvn_residual(exact, |_| Ok(h.clone()), 0.0, 5e-3, (0.0, 1.0)).unwrap();
        assert!(r1.one_sided);
        let ratio = r1.value / r2.value;
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn spectrum_drift_examples() {
        let sys = SpinSystem::spin_half(2).unwrap();
        let totals = TotalSpinMatrices::new(&sys, DENSE_CAP).unwrap();
        let i = totals.dot(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(invariant_spectrum_drift(&[i.clone(), i.clone(), i.clone()]).unwrap(), 0.0);
        let grown = totals.dot(&Vec3::new(0.0, 0.6, 0.8 * 1.01)).unwrap();
        let scaled = totals.dot(&(Vec3::new(0.0, 0.6, 0.8).normalize() * 1.01)).unwrap();
        let d = invariant_spectrum_drift(&[i.clone(), scaled]).unwrap();
        assert!((d - 0.01).abs() < 1e-12, "{d}");
        assert!(invariant_spectrum_drift(&[i, grown]).unwrap() > 0.0);
    }

    proptest::proptest! {
        #[test]
        fn norm_is_conserved(b in 0.1f64..2.0, theta in 0.0f64..3.1, omega in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let r0 = Vec3::new(x, y, z);
            proptest::prop_assume!(r0.norm() > 1e-2);
            let field = FieldProfile::rotating_cone(b, theta, omega).unwrap();
            let grid = TimeGrid::uniform(0.0, 10.0, 1000).unwrap();
            let r = solve_r_vector(&field, r0, &grid).unwrap();
            proptest::prop_assert!(r.max_norm_drift() <= crate::tolerances::R_NORM_TOL);
        }
    }

    #[test]
    fn custom_invariant_must_be_hermitian() {
        let sys = SpinSystem::spin_half(1).unwrap();
        let bad = OperatorExpr::spin(0, Axis::X) * C64::new(0.0, 1.0);
        assert!(initial_invariant(&InvariantChoice::Custom(bad), &sys, DENSE_CAP).is_err());
    }
}
