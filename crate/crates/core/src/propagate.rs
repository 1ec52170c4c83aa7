//! Time-ordered unitary propagation, the product formula `U_s = U₀U'`, and
//! the rotation-frame / residual split of single-site evolutions.

use nalgebra::SymmetricEigen;

use crate::algebra::{embed_with_cap, expm_skew, reunitarize, single_spin_matrix, Axis, DenseOperator, Spin, SpinSystem};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::invariant::{RTrajectory, TotalSpinMatrices};
use crate::model::{build_interaction, FieldProfile, ModelSpec};
use crate::tolerances::{ANTIPODAL_TOL, UNITARY_TOL};
use crate::{CMatrix, Vec3, C64};

/// A Hermitian generator that can be evaluated at any time in its domain.
pub trait Hamiltonian {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> Result<DenseOperator>;
    fn is_time_independent(&self) -> bool {
        false
    }
    /// `exp(−i·dt·H(t_mid))`.
    fn exp_step(&self, t_mid: f64, dt: f64) -> Result<DenseOperator> {
        let h = self.at(t_mid)?;
        if !h.is_hermitian() {
            return Err(Error::domain(format!("Hamiltonian is not Hermitian at t = {t_mid}")));
        }
        expm_skew(&h, dt)
    }
}

/// Forces the generic eigendecomposition step of the wrapped Hamiltonian.
pub struct EigenStepped<'a>(pub &'a dyn Hamiltonian);

impl Hamiltonian for EigenStepped<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn at(&self, t: f64) -> Result<DenseOperator> {
        self.0.at(t)
    }

    fn is_time_independent(&self) -> bool {
        self.0.is_time_independent()
    }
}

/// `exp(−i·dt·B·S)` on one site; closed form for spin-1/2.
fn site_exp(spin: Spin, b: &Vec3, dt: f64) -> Result<CMatrix> {
    if spin.is_half() {
        return Ok(su2_exp(&(b * -dt)));
    }
    let mut g = CMatrix::zeros(spin.dim(), spin.dim());
    for a in Axis::ALL {
        g += single_spin_matrix(spin, a).matrix() * C64::new(b[a.index()], 0.0);
    }
    Ok(expm_skew(&DenseOperator::new_hermitian_unchecked(g), dt)?.into_matrix())
}

/// Which part of `H_s = H₀ + H'` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Dipole,
    Interaction,
    Total,
}

impl Part {
    pub fn label(&self) -> &'static str {
        match self {
            Part::Dipole => "H0",
            Part::Interaction => "H'",
            Part::Total => "Hs",
        }
    }
}

/// Dense evaluation of a model Hamiltonian. The dipole part is a linear
/// combination of three precomputed total-spin matrices; a constant `H'` is
/// embedded once.
#[derive(Debug, Clone)]
pub struct ModelHamiltonian {
    model: ModelSpec,
    part: Part,
    totals: TotalSpinMatrices,
    constant_interaction: Option<DenseOperator>,
    cap: usize,
}

impl ModelHamiltonian {
    pub fn new(model: &ModelSpec, part: Part, cap: usize) -> Result<Self> {
        let totals = TotalSpinMatrices::new(&model.system, cap)?;
        let constant_interaction = if model.interaction.is_time_independent() {
            let hp = build_interaction(&model.interaction, 0.0)?;
            Some(embed_with_cap(&hp, &model.system, cap)?)
        } else {
            None
        };
        Ok(ModelHamiltonian {
            model: model.clone(),
            part,
            totals,
            constant_interaction,
            cap,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn part(&self) -> Part {
        self.part
    }

    fn interaction_at(&self, t: f64) -> Result<DenseOperator> {
        match &self.constant_interaction {
            Some(h) => Ok(h.clone()),
            None => {
                let hp = build_interaction(&self.model.interaction, t)?;
                embed_with_cap(&hp, &self.model.system, self.cap)
            }
        }
    }
}

impl Hamiltonian for ModelHamiltonian {
    fn dim(&self) -> usize {
        self.model.system.dim()
    }

    fn at(&self, t: f64) -> Result<DenseOperator> {
        match self.part {
            Part::Dipole => self.totals.dot(&self.model.field.eval(t)?),
            Part::Interaction => self.interaction_at(t),
            Part::Total => {
                let h0 = self.totals.dot(&self.model.field.eval(t)?)?;
                let hp = self.interaction_at(t)?;
                Ok(DenseOperator::new_hermitian_unchecked(h0.into_matrix() + hp.matrix()))
            }
        }
    }

    /// The dipole part factorizes over sites, so its step is a Kronecker
    /// product of single-site exponentials.
    fn exp_step(&self, t_mid: f64, dt: f64) -> Result<DenseOperator> {
        if self.part != Part::Dipole {
            return expm_skew(&self.at(t_mid)?, dt);
        }
        let b = self.model.field.eval(t_mid)?;
        let sys = &self.model.system;
        let mut cache: Vec<(Spin, CMatrix)> = Vec::new();
        let mut out = CMatrix::identity(1, 1);
        for i in 0..sys.n_sites() {
            let spin = sys.spin(i);
            if !cache.iter().any(|(s, _)| *s == spin) {
                cache.push((spin, site_exp(spin, &b, dt)?));
            }
            let m = &cache.iter().find(|(s, _)| *s == spin).unwrap().1;
            out = out.kronecker(m);
        }
        Ok(DenseOperator::new_unitary_unchecked(out))
    }

    fn is_time_independent(&self) -> bool {
        match self.part {
            Part::Dipole => matches!(self.model.field, FieldProfile::Constant(_)),
            Part::Interaction => self.constant_interaction.is_some(),
            Part::Total => {
                matches!(self.model.field, FieldProfile::Constant(_)) && self.constant_interaction.is_some()
            }
        }
    }
}

/// `B(t)·S` on a single site of spin `s`.
#[derive(Debug, Clone)]
pub struct SiteHamiltonian {
    field: FieldProfile,
    spin: Spin,
    s: [DenseOperator; 3],
}

impl SiteHamiltonian {
    pub fn new(field: &FieldProfile, spin: Spin) -> Self {
        SiteHamiltonian {
            field: field.clone(),
            spin,
            s: Axis::ALL.map(|a| single_spin_matrix(spin, a)),
        }
    }
}

impl Hamiltonian for SiteHamiltonian {
    fn dim(&self) -> usize {
        self.s[0].dim()
    }

    fn at(&self, t: f64) -> Result<DenseOperator> {
        let b = self.field.eval(t)?;
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for a in 0..3 {
            m += self.s[a].matrix() * C64::new(b[a], 0.0);
        }
        Ok(DenseOperator::new_hermitian_unchecked(m))
    }

    fn is_time_independent(&self) -> bool {
        matches!(self.field, FieldProfile::Constant(_))
    }

    fn exp_step(&self, t_mid: f64, dt: f64) -> Result<DenseOperator> {
        Ok(DenseOperator::new_unitary_unchecked(site_exp(self.spin, &self.field.eval(t_mid)?, dt)?))
    }
}

/// Time-independent Hamiltonian given as a dense operator.
#[derive(Debug, Clone)]
pub struct ConstantHamiltonian(pub DenseOperator);

impl Hamiltonian for ConstantHamiltonian {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn at(&self, _t: f64) -> Result<DenseOperator> {
        Ok(self.0.clone())
    }

    fn is_time_independent(&self) -> bool {
        true
    }
}

/// Unitaries on the nodes of a grid, starting from the identity.
#[derive(Debug, Clone)]
pub struct UnitaryPath {
    grid: TimeGrid,
    unitaries: Vec<DenseOperator>,
    label: String,
}

impl UnitaryPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn unitaries(&self) -> &[DenseOperator] {
        &self.unitaries
    }

    pub fn at(&self, k: usize) -> &DenseOperator {
        &self.unitaries[k]
    }

    pub fn last(&self) -> &DenseOperator {
        &self.unitaries[self.unitaries.len() - 1]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.unitaries[0].dim()
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.unitaries
            .iter()
            .map(|u| u.unitarity_defect())
            .fold(0.0, f64::max)
    }

    /// `U(t)` off the grid: one midpoint step from the nearest node.
    pub fn evolve_to(&self, ham: &dyn Hamiltonian, t: f64) -> Result<DenseOperator> {
        let k = self.grid.nearest(t)?;
        let h = t - self.grid.times()[k];
        if h == 0.0 {
            return Ok(self.unitaries[k].clone());
        }
        let step = ham.exp_step(self.grid.times()[k] + 0.5 * h, h)?;
        Ok(DenseOperator::new_unitary_unchecked(step.matrix() * self.unitaries[k].matrix()))
    }
}

/// `exp(−i·dt·H)` for a fixed `H`, reusing one eigendecomposition.
struct CachedExp {
    vectors: CMatrix,
    values: Vec<f64>,
}

impl CachedExp {
    fn new(h: &DenseOperator) -> Self {
        let eig = SymmetricEigen::new(h.matrix().clone());
        CachedExp {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.iter().copied().collect(),
        }
    }

    fn exp(&self, dt: f64) -> DenseOperator {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -dt * lambda);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= phase;
            }
        }
        DenseOperator::new_unitary_unchecked(reunitarize(&(scaled * self.vectors.adjoint())))
    }
}

/// Midpoint-exponential propagation,
/// `U(t + Δt) = exp(−iΔt·H(t + Δt/2))·U(t)`, with `substeps` equal steps per
/// grid interval.
pub fn propagate(ham: &dyn Hamiltonian, grid: &TimeGrid, substeps: usize, label: &str) -> Result<UnitaryPath> {
    if substeps == 0 {
        return Err(Error::domain("substeps must be at least 1"));
    }
    let dim = ham.dim();
    let times = grid.times();
    let cached = if ham.is_time_independent() {
        let h = ham.at(times[0])?;
        if !h.is_hermitian() {
            return Err(Error::domain("Hamiltonian is not Hermitian"));
        }
        Some(CachedExp::new(&h))
    } else {
        None
    };
    let mut unitaries = Vec::with_capacity(times.len());
    let mut u = CMatrix::identity(dim, dim);
    unitaries.push(DenseOperator::identity(dim));
    for w in times.windows(2) {
        let dt = (w[1] - w[0]) / substeps as f64;
        for s in 0..substeps {
            let step = match &cached {
                Some(c) => c.exp(dt),
                None => ham.exp_step(w[0] + (s as f64 + 0.5) * dt, dt)?,
            };
            u = step.matrix() * &u;
        }
        u = reunitarize(&u);
        let op = DenseOperator::new_unitary_unchecked(u.clone());
        let defect = op.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(Error::domain(format!(
                "propagation lost unitarity at t = {} (‖U†U−1‖_F = {defect:.3e})",
                w[1]
            )));
        }
        unitaries.push(op);
    }
    Ok(UnitaryPath {
        grid: grid.clone(),
        unitaries,
        label: label.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    /// `‖U_s(t_k) − U₀(t_k)U'(t_k)‖_F`.
    pub per_node: Vec<f64>,
    pub max: f64,
}

/// The three paths of a model, each propagated from its own Hamiltonian.
#[derive(Debug, Clone)]
pub struct ModelPaths {
    pub total: UnitaryPath,
    pub dipole: UnitaryPath,
    pub interaction: UnitaryPath,
}

pub fn propagate_model(model: &ModelSpec, grid: &TimeGrid, substeps: usize, cap: usize) -> Result<ModelPaths> {
    let run = |part: Part| -> Result<UnitaryPath> {
        let h = ModelHamiltonian::new(model, part, cap)?;
        propagate(&h, grid, substeps, part.label())
    };
    Ok(ModelPaths {
        total: run(Part::Total)?,
        dipole: run(Part::Dipole)?,
        interaction: run(Part::Interaction)?,
    })
}

pub fn factorization_deviation(paths: &ModelPaths) -> FactorizationReport {
    let per_node: Vec<f64> = (0..paths.total.unitaries().len())
        .map(|k| {
            let prod = paths.dipole.at(k).matrix() * paths.interaction.at(k).matrix();
            (paths.total.at(k).matrix() - prod).norm()
        })
        .collect();
    let max = per_node.iter().copied().fold(0.0, f64::max);
    FactorizationReport { per_node, max }
}

/// `max_t ‖U_s(t) − U₀(t)U'(t)‖_F`.
pub fn factorization_check(model: &ModelSpec, grid: &TimeGrid, substeps: usize, cap: usize) -> Result<FactorizationReport> {
    Ok(factorization_deviation(&propagate_model(model, grid, substeps, cap)?))
}

#[derive(Debug, Clone)]
pub struct PerSiteReport {
    pub site_paths: Vec<UnitaryPath>,
    /// `‖⊗_i U_i(t_k) − U₀(t_k)‖_F`.
    pub per_node: Vec<f64>,
    pub max: f64,
    /// Largest `‖[U_i, U_j]‖_F` over site pairs, sampled along the grid.
    pub max_pair_commutator: f64,
}

/// Single-site evolution `U_i(t)` of every site.
pub fn propagate_sites(field: &FieldProfile, sys: &SpinSystem, grid: &TimeGrid, substeps: usize) -> Result<Vec<UnitaryPath>> {
    (0..sys.n_sites())
        .map(|i| {
            let h = SiteHamiltonian::new(field, sys.spin(i));
            propagate(&h, grid, substeps, &format!("U{i}"))
        })
        .collect()
}

/// `op` acting on `site`, identity elsewhere.
pub fn embed_site(op: &CMatrix, sys: &SpinSystem, site: usize) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for i in 0..sys.n_sites() {
        let d = sys.site_dim(i);
        let factor = if i == site { op.clone() } else { CMatrix::identity(d, d) };
        out = out.kronecker(&factor);
    }
    out
}

/// Kronecker product of one operator per site (site 0 slowest).
pub fn kron_sites(ops: &[&CMatrix]) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for op in ops {
        out = out.kronecker(*op);
    }
    out
}

pub fn per_site_product_check(field: &FieldProfile, sys: &SpinSystem, grid: &TimeGrid, substeps: usize, cap: usize) -> Result<PerSiteReport> {
    let model = ModelSpec::new(sys.clone(), field.clone(), crate::model::InteractionSpec::none())?;
    let h0 = ModelHamiltonian::new(&model, Part::Dipole, cap)?;
    let joint = propagate(&EigenStepped(&h0), grid, substeps, "H0")?;
    let site_paths = (0..sys.n_sites())
        .map(|i| {
            let h = SiteHamiltonian::new(field, sys.spin(i));
            propagate(&EigenStepped(&h), grid, substeps, &format!("U{i}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_nodes = grid.len();
    let mut per_node = Vec::with_capacity(n_nodes);
    for k in 0..n_nodes {
        let ops: Vec<&CMatrix> = site_paths.iter().map(|p| p.at(k).matrix()).collect();
        per_node.push((kron_sites(&ops) - joint.at(k).matrix()).norm());
    }
    let max = per_node.iter().copied().fold(0.0, f64::max);
    let mut max_pair_commutator = 0.0f64;
    let n = sys.n_sites();
    if n > 1 {
        let samples = 8.min(n_nodes);
        for s in 0..samples {
            let k = s * (n_nodes - 1) / (samples - 1).max(1);
            let embedded: Vec<CMatrix> = (0..n).map(|i| embed_site(site_paths[i].at(k).matrix(), sys, i)).collect();
            for i in 0..n {
                for j in (i + 1)..n {
                    let c = &embedded[i] * &embedded[j] - &embedded[j] * &embedded[i];
                    max_pair_commutator = max_pair_commutator.max(c.norm());
                }
            }
        }
    }
    Ok(PerSiteReport {
        site_paths,
        per_node,
        max,
        max_pair_commutator,
    })
}

/// Rotation taking `e₃` to `r̂` along the shortest great circle:
/// unit axis, angle, and whether the fixed antipodal rotor was used.
pub fn rotor_axis_angle(r_hat: &Vec3) -> Result<(Vec3, f64, bool)> {
    let n = r_hat.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::domain("rotor target must be a nonzero finite vector"));
    }
    let r = r_hat / n;
    let e3 = Vec3::new(0.0, 0.0, 1.0);
    let axis = e3.cross(&r);
    let s = axis.norm();
    let c = r[2];
    if s <= ANTIPODAL_TOL {
        if c > 0.0 {
            return Ok((Vec3::new(1.0, 0.0, 0.0), 0.0, false));
        }
        // e₃ → e₁ → −e₃, both quarter turns about e₂.
        return Ok((Vec3::new(0.0, 1.0, 0.0), std::f64::consts::PI, true));
    }
    Ok((axis / s, s.atan2(c), false))
}

/// `W = exp(−iθ n̂·S)` with `W S³ W† = r̂·S`.
pub fn geodesic_rotor(spin: Spin, r_hat: &Vec3) -> Result<(DenseOperator, bool)> {
    let (axis, angle, antipodal) = rotor_axis_angle(r_hat)?;
    let d = spin.dim();
    if angle == 0.0 {
        return Ok((DenseOperator::identity(d), antipodal));
    }
    let mut g = CMatrix::zeros(d, d);
    for a in Axis::ALL {
        g += single_spin_matrix(spin, a).matrix() * C64::new(axis[a.index()], 0.0);
    }
    let w = if spin.is_half() {
        // exp(−iθ n·σ/2) = cos(θ/2) − i sin(θ/2) n·σ
        let (s, c) = (0.5 * angle).sin_cos();
        CMatrix::identity(2, 2) * C64::new(c, 0.0) - g * C64::new(0.0, 2.0 * s)
    } else {
        expm_skew(&DenseOperator::new_hermitian_unchecked(g), angle)?.into_matrix()
    };
    Ok((DenseOperator::new_unitary_unchecked(w), antipodal))
}

/// Result of splitting a single-site unitary as `u = e^{iφ}·exp(iρ·S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub rho: Vec3,
    pub global_phase: f64,
    /// `u = −1` up to phase: any `‖ρ‖ = 2π` is valid, `(0, 0, 2π)` is returned.
    pub antipodal: bool,
    pub reconstruction_error: f64,
}

/// `exp(iρ·S)` on spin-1/2.
pub fn su2_exp(rho: &Vec3) -> CMatrix {
    let a = 0.5 * rho.norm();
    if a == 0.0 {
        return CMatrix::identity(2, 2);
    }
    let n = rho / rho.norm();
    let (s, c) = a.sin_cos();
    let mut m = CMatrix::identity(2, 2) * C64::new(c, 0.0);
    m[(0, 0)] += C64::new(0.0, s * n[2]);
    m[(1, 1)] -= C64::new(0.0, s * n[2]);
    m[(0, 1)] += C64::new(s * n[1], s * n[0]);
    m[(1, 0)] += C64::new(-s * n[1], s * n[0]);
    m
}

/// su(2) part of the principal logarithm of a 2×2 unitary.
pub fn extract_generator(u: &DenseOperator) -> Result<Generator> {
    if u.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            found: u.dim(),
        });
    }
    let defect = u.unitarity_defect();
    if defect > UNITARY_TOL {
        return Err(Error::domain(format!("generator extraction needs a unitary (‖U†U−1‖_F = {defect:.3e})")));
    }
    let m = u.matrix();
    let phi = 0.5 * m.determinant().arg();
    let v = m * C64::from_polar(1.0, -phi);
    let cos_a = 0.5 * (v[(0, 0)] + v[(1, 1)]).re;
    // K = (v − v†)/(2i) = sin a · n·σ
    let k = (&v - v.adjoint()) * C64::new(0.0, -0.5);
    let ns = Vec3::new(k[(1, 0)].re, k[(1, 0)].im, k[(0, 0)].re);
    let sin_a = ns.norm();
    let (rho, antipodal) = if sin_a <= ANTIPODAL_TOL && cos_a < 0.0 {
        (Vec3::new(0.0, 0.0, 2.0 * std::f64::consts::PI), true)
    } else if sin_a == 0.0 {
        (Vec3::zeros(), false)
    } else {
        let a = sin_a.atan2(cos_a);
        (ns * (2.0 * a / sin_a), false)
    };
    let rebuilt = su2_exp(&rho) * C64::from_polar(1.0, phi);
    Ok(Generator {
        rho,
        global_phase: phi,
        antipodal,
        reconstruction_error: (rebuilt - m).norm(),
    })
}

/// `U_i = W_i(t)·Z_i(t)·W_i(0)†` on every site and node.
#[derive(Debug, Clone)]
pub struct FrameDecomposition {
    grid: TimeGrid,
    spins: Vec<Spin>,
    r: RTrajectory,
    /// `[site][node]`
    pub w: Vec<Vec<DenseOperator>>,
    /// `[site][node]`, `Z = W(t)†·U·W(0)`.
    pub z: Vec<Vec<DenseOperator>>,
    /// `[site][node]` generator of `U_i`, spin-1/2 sites only.
    pub rho: Vec<Option<Vec<Generator>>>,
    /// Nodes where the antipodal rotor was used.
    pub antipodal: Vec<bool>,
    /// `max_i ‖[Z_i, S_i³]‖_F` per node.
    pub z_commutator: Vec<f64>,
    /// `max_i ‖W_i S³ W_i† − R̂·S‖_F` per node.
    pub conjugation_defect: Vec<f64>,
}

impl FrameDecomposition {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn trajectory(&self) -> &RTrajectory {
        &self.r
    }

    pub fn max_z_commutator(&self) -> f64 {
        self.z_commutator.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_conjugation_defect(&self) -> f64 {
        self.conjugation_defect.iter().copied().fold(0.0, f64::max)
    }

    /// `‖U_i − W_i Z_i W_i(0)†‖_F`, maximized over sites and nodes.
    pub fn max_reassembly_error(&self, site_paths: &[UnitaryPath]) -> f64 {
        let mut worst = 0.0f64;
        for (i, path) in site_paths.iter().enumerate() {
            let w0 = self.w[i][0].matrix();
            for k in 0..self.grid.len() {
                let rebuilt = self.w[i][k].matrix() * self.z[i][k].matrix() * w0.adjoint();
                worst = worst.max((rebuilt - path.at(k).matrix()).norm());
            }
        }
        worst
    }

    /// Frame rotor of `site` at an arbitrary time, from the locally
    /// transported `R`.
    pub fn w_at(&self, site: usize, t: f64) -> Result<DenseOperator> {
        let r = self.r.flow_to(t)?;
        Ok(geodesic_rotor(self.spins[site], &r)?.0)
    }
}

pub fn extract_frames(site_paths: &[UnitaryPath], spins: &[Spin], r: &RTrajectory) -> Result<FrameDecomposition> {
    if site_paths.len() != spins.len() || spins.is_empty() {
        return Err(Error::Dimension {
            expected: spins.len(),
            found: site_paths.len(),
        });
    }
    let grid = r.grid().clone();
    for p in site_paths {
        if p.grid().times() != grid.times() {
            return Err(Error::domain("site paths and R trajectory must share one grid"));
        }
    }
    let n_nodes = grid.len();
    let mut w = Vec::with_capacity(spins.len());
    let mut z = Vec::with_capacity(spins.len());
    let mut rho = Vec::with_capacity(spins.len());
    let mut antipodal = vec![false; n_nodes];
    let mut z_commutator = vec![0.0f64; n_nodes];
    let mut conjugation_defect = vec![0.0f64; n_nodes];
    for (i, &spin) in spins.iter().enumerate() {
        if site_paths[i].dim() != spin.dim() {
            return Err(Error::Dimension {
                expected: spin.dim(),
                found: site_paths[i].dim(),
            });
        }
        let s = Axis::ALL.map(|a| single_spin_matrix(spin, a).into_matrix());
        let mut wi = Vec::with_capacity(n_nodes);
        let mut zi = Vec::with_capacity(n_nodes);
        for k in 0..n_nodes {
            let r_k = r.values()[k];
            let (wk, flag) = geodesic_rotor(spin, &r_k)?;
            antipodal[k] |= flag;
            let r_hat = r_k / r_k.norm();
            let target = &s[0] * C64::new(r_hat[0], 0.0) + &s[1] * C64::new(r_hat[1], 0.0) + &s[2] * C64::new(r_hat[2], 0.0);
            let conj = wk.matrix() * &s[2] * wk.matrix().adjoint();
            conjugation_defect[k] = conjugation_defect[k].max((conj - target).norm());
            wi.push(wk);
        }
        let w0 = wi[0].matrix().clone();
        for k in 0..n_nodes {
            let zk = wi[k].matrix().adjoint() * site_paths[i].at(k).matrix() * &w0;
            let comm = (&zk * &s[2] - &s[2] * &zk).norm();
            z_commutator[k] = z_commutator[k].max(comm);
            zi.push(DenseOperator::new_unitary_unchecked(zk));
        }
        let gens = if spin.is_half() {
            Some(
                site_paths[i]
                    .unitaries()
                    .iter()
                    .map(extract_generator)
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        w.push(wi);
        z.push(zi);
        rho.push(gens);
    }
    Ok(FrameDecomposition {
        grid,
        spins: spins.to_vec(),
        r: r.clone(),
        w,
        z,
        rho,
        antipodal,
        z_commutator,
        conjugation_defect,
    })
}
