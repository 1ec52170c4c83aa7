//! Phase decomposition in the invariant eigenframe.
//!
//! Frame states are `|φ_n(t)⟩ = (⊗_i W_i(t))|n₁…n_N⟩`. Labels sharing the
//! same `Σ n_i` span one eigenspace of the invariant, and a rotationally
//! invariant interaction mixes them, so phases are taken per eigenspace
//! (the U(1) part, `arg det`, divided by the block size) and reported for
//! every label of the block. For product evolutions with uniform spins this
//! coincides with the per-label phase.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::algebra::{Spin, SpinSystem};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::invariant::{solve_r_vector_with, RSolveOptions, RTrajectory, TotalSpinMatrices};
use crate::model::{ModelSpec, ensure_same_system};
use crate::propagate::{geodesic_rotor, kron_sites, propagate, FrameDecomposition, Hamiltonian, ModelHamiltonian, Part, UnitaryPath};
use crate::tolerances::{DENSE_CAP, FRAME_FOLLOWING_MIN_OVERLAP};
use crate::{CMatrix, Vec3, C64};

/// Eigenframe label `(n₁, …, n_N)`, stored as `2n_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    twice_m: Vec<i32>,
}

impl Label {
    pub fn new(twice_m: Vec<i32>) -> Self {
        Label { twice_m }
    }

    pub fn twice_m(&self) -> &[i32] {
        &self.twice_m
    }

    /// `2Σ n_i`.
    pub fn twice_total(&self) -> i32 {
        self.twice_m.iter().sum()
    }

    pub fn total(&self) -> f64 {
        0.5 * self.twice_total() as f64
    }
}

fn fmt_half(f: &mut fmt::Formatter<'_>, twice: i32) -> fmt::Result {
    let sign = if twice > 0 {
        "+"
    } else if twice < 0 {
        "-"
    } else {
        ""
    };
    let a = twice.abs();
    if a % 2 == 0 {
        write!(f, "{sign}{}", a / 2)
    } else {
        write!(f, "{sign}{a}/2")
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &m) in self.twice_m.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            fmt_half(f, m)?;
        }
        Ok(())
    }
}

/// Smooth phase `χ(t)` multiplying every frame state.
pub type Gauge = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Product eigenframe of `R(t)·Σ_i S_i`.
#[derive(Clone)]
pub struct EigenFrame {
    spins: Vec<Spin>,
    r: RTrajectory,
    labels: Vec<Label>,
    gauge: Option<Gauge>,
}

impl fmt::Debug for EigenFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EigenFrame")
            .field("spins", &self.spins)
            .field("labels", &self.labels.len())
            .field("gauge", &self.gauge.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameCheck {
    /// `max_t ‖Φ†Φ − 1‖_F`.
    pub max_gram_defect: f64,
    /// `max_t max_n ‖I φ_n − ‖R‖Σn_i φ_n‖`.
    pub max_eigen_defect: f64,
}

impl EigenFrame {
    pub fn new(r: &RTrajectory, sys: &SpinSystem) -> Self {
        let labels = (0..sys.dim()).map(|k| Label::new(sys.twice_m(k))).collect();
        EigenFrame {
            spins: sys.spins().to_vec(),
            r: r.clone(),
            labels,
            gauge: None,
        }
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = Some(gauge);
        self
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn grid(&self) -> &TimeGrid {
        self.r.grid()
    }

    pub fn trajectory(&self) -> &RTrajectory {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Single-site rotors `W_i(t)`, one per site.
    pub fn rotors_at(&self, t: f64) -> Result<Vec<CMatrix>> {
        let r = self.r.flow_to(t)?;
        let mut cache: Vec<(Spin, CMatrix)> = Vec::new();
        let mut out = Vec::with_capacity(self.spins.len());
        for &s in &self.spins {
            let w = match cache.iter().find(|(c, _)| *c == s) {
                Some((_, w)) => w.clone(),
                None => {
                    let w = geodesic_rotor(s, &r)?.0.into_matrix();
                    cache.push((s, w.clone()));
                    w
                }
            };
            out.push(w);
        }
        Ok(out)
    }

    pub fn gauge_at(&self, t: f64) -> f64 {
        self.gauge.as_ref().map_or(0.0, |g| g(t))
    }

    /// Frame matrix whose columns are `|φ_n(t)⟩` in label order.
    pub fn matrix_at(&self, t: f64) -> Result<CMatrix> {
        let rotors = self.rotors_at(t)?;
        let ops: Vec<&CMatrix> = rotors.iter().collect();
        let mut m = kron_sites(&ops);
        if self.gauge.is_some() {
            m *= C64::from_polar(1.0, self.gauge_at(t));
        }
        Ok(m)
    }

    /// `Re⟨φ_n| i∂_t |φ_n⟩` for every label at node `k`, by finite
    /// differences of step `h` on the single-site rotors (the product frame
    /// connection is the sum of site connections).
    pub fn connection(&self, k: usize, h: f64) -> Result<Vec<f64>> {
        let grid = self.grid();
        let t = grid.times()[k];
        let central = t - h >= grid.start() && t + h <= grid.end();
        let s = if central || t + 2.0 * h <= grid.end() { 1.0 } else { -1.0 };
        let w0 = self.rotors_at(t)?;
        let (deriv, dchi): (Vec<CMatrix>, f64) = if central {
            let p = self.rotors_at(t + h)?;
            let m = self.rotors_at(t - h)?;
            let scale = C64::new(0.5 / h, 0.0);
            (
                p.iter().zip(&m).map(|(a, b)| (a - b) * scale).collect(),
                (self.gauge_at(t + h) - self.gauge_at(t - h)) * 0.5 / h,
            )
        } else {
            let f1 = self.rotors_at(t + s * h)?;
            let f2 = self.rotors_at(t + 2.0 * s * h)?;
            let scale = C64::new(0.5 / (s * h), 0.0);
            (
                w0.iter()
                    .zip(f1.iter().zip(&f2))
                    .map(|(a, (b, c))| (a * C64::new(-3.0, 0.0) + b * C64::new(4.0, 0.0) - c) * scale)
                    .collect(),
                (-3.0 * self.gauge_at(t) + 4.0 * self.gauge_at(t + s * h) - self.gauge_at(t + 2.0 * s * h)) * 0.5 / (s * h),
            )
        };
        // Re⟨m|W† i dW|m⟩ = −Im (W† dW)_mm
        let site_conn: Vec<Vec<f64>> = w0
            .iter()
            .zip(&deriv)
            .map(|(w, d)| {
                let a = w.adjoint() * d;
                (0..a.nrows()).map(|m| -a[(m, m)].im).collect()
            })
            .collect();
        Ok(self
            .labels
            .iter()
            .map(|l| {
                l.twice_m()
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| site_conn[i][((self.spins[i].twice() as i32 - m) / 2) as usize])
                    .sum::<f64>()
                    - dchi
            })
            .collect())
    }

    pub fn matrix(&self, k: usize) -> Result<CMatrix> {
        self.matrix_at(self.grid().times()[k])
    }

    pub fn check(&self, totals: &TotalSpinMatrices) -> Result<FrameCheck> {
        let n = self.dim();
        let mut out = FrameCheck {
            max_gram_defect: 0.0,
            max_eigen_defect: 0.0,
        };
        for k in 0..self.grid().len() {
            let phi = self.matrix(k)?;
            let gram = phi.adjoint() * &phi - CMatrix::identity(n, n);
            out.max_gram_defect = out.max_gram_defect.max(gram.norm());
            let r = self.r.values()[k];
            let inv = totals.dot(&r)?;
            let applied = inv.matrix() * &phi;
            for (j, label) in self.labels.iter().enumerate() {
                let lambda = r.norm() * label.total();
                let d = (applied.column(j) - phi.column(j) * C64::new(lambda, 0.0)).norm();
                out.max_eigen_defect = out.max_eigen_defect.max(d);
            }
        }
        Ok(out)
    }
}

pub fn build_eigenframe(frames: &FrameDecomposition, sys: &SpinSystem) -> Result<EigenFrame> {
    if frames.spins() != sys.spins() {
        return Err(Error::domain("frame decomposition belongs to a different system"));
    }
    Ok(EigenFrame::new(frames.trajectory(), sys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FramePolicy {
    /// Fail with a frame-following error when the projection drops below 0.99.
    Strict,
    /// Record the smallest projection and carry on.
    Report,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub label: Label,
    pub block_dim: usize,
    /// Unwrapped `arg det ⟨φ(t)|U(t)|φ(0)⟩ / d` on the label's eigenspace.
    pub total: f64,
    /// `−∫ tr(Φ†HΦ)/d dt`.
    pub dynamical: f64,
    /// `∫ tr(Φ† i∂_tΦ)/d dt`.
    pub geometric: f64,
    /// `total − (dynamical + geometric)`.
    pub residual: f64,
    /// `min_t |det ⟨φ(t)|U(t)|φ(0)⟩|^{1/d}`.
    pub min_overlap: f64,
}

impl PhaseRecord {
    /// Geometric phase obtained from the dynamics, `total − dynamical`.
    pub fn geometric_from_dynamics(&self) -> f64 {
        self.total - self.dynamical
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptions {
    pub policy: FramePolicy,
    /// Frame derivative step is the grid spacing divided by this.
    pub fd_divisor: usize,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions {
            policy: FramePolicy::Strict,
            fd_divisor: 16,
        }
    }
}

fn trapezoid(times: &[f64], f: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(f.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

fn wrap(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x % two_pi;
    if y > std::f64::consts::PI {
        y -= two_pi;
    } else if y <= -std::f64::consts::PI {
        y += two_pi;
    }
    y
}

/// Eigenspaces of the invariant: label indices grouped by `2Σn_i`.
fn blocks(labels: &[Label]) -> Vec<(i32, Vec<usize>)> {
    let mut map: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        map.entry(-l.twice_total()).or_default().push(i);
    }
    map.into_iter().map(|(k, v)| (-k, v)).collect()
}

fn sub_matrix(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

pub fn compute_phases(frame: &EigenFrame, ham: &dyn Hamiltonian, path: &UnitaryPath, opts: &PhaseOptions) -> Result<Vec<PhaseRecord>> {
    if path.grid().times() != frame.grid().times() {
        return Err(Error::domain("frame and unitary path must share one grid"));
    }
    if path.dim() != frame.dim() || ham.dim() != frame.dim() {
        return Err(Error::Dimension {
            expected: frame.dim(),
            found: path.dim(),
        });
    }
    if opts.fd_divisor == 0 {
        return Err(Error::domain("fd_divisor must be at least 1"));
    }
    let times = frame.grid().times();
    let h = frame.grid().min_spacing() / opts.fd_divisor as f64;
    let groups = blocks(frame.labels());
    let nb = groups.len();
    let phi0 = frame.matrix(0)?;

    let mut unwrapped = vec![0.0f64; nb];
    let mut last_raw = vec![0.0f64; nb];
    let mut min_overlap = vec![f64::INFINITY; nb];
    let mut dyn_integrand = vec![Vec::with_capacity(times.len()); nb];
    let mut geo_integrand = vec![Vec::with_capacity(times.len()); nb];

    for (k, &t) in times.iter().enumerate() {
        let phi = frame.matrix(k)?;
        let v = phi.adjoint() * path.at(k).matrix() * &phi0;
        let hf = phi.adjoint() * ham.at(t)?.matrix() * &phi;
        let conn = frame.connection(k, h)?;
        for (b, (_, idx)) in groups.iter().enumerate() {
            let d = idx.len() as f64;
            let det = sub_matrix(&v, idx).determinant();
            let overlap = det.norm().powf(1.0 / d);
            if overlap < FRAME_FOLLOWING_MIN_OVERLAP && opts.policy == FramePolicy::Strict {
                return Err(Error::FrameFollowing {
                    label: frame.labels()[idx[0]].to_string(),
                    t,
                    overlap,
                });
            }
            min_overlap[b] = min_overlap[b].min(overlap);
            let raw = det.arg();
            if k == 0 {
                unwrapped[b] = raw;
            } else {
                unwrapped[b] += wrap(raw - last_raw[b]);
            }
            last_raw[b] = raw;
            dyn_integrand[b].push(-idx.iter().map(|&i| hf[(i, i)].re).sum::<f64>() / d);
            geo_integrand[b].push(idx.iter().map(|&i| conn[i]).sum::<f64>() / d);
        }
    }

    let mut records = vec![None; frame.dim()];
    for (b, (_, idx)) in groups.iter().enumerate() {
        let d = idx.len();
        let total = unwrapped[b] / d as f64;
        let dynamical = trapezoid(times, &dyn_integrand[b]);
        let geometric = trapezoid(times, &geo_integrand[b]);
        for &i in idx {
            records[i] = Some(PhaseRecord {
                label: frame.labels()[i].clone(),
                block_dim: d,
                total,
                dynamical,
                geometric,
                residual: total - (dynamical + geometric),
                min_overlap: min_overlap[b],
            });
        }
    }
    Ok(records.into_iter().map(|r| r.expect("every label lies in a block")).collect())
}

/// Initial auxiliary vector for a phase run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum R0Choice {
    /// Co-rotating solution when the field has one, otherwise along `B(t₀)`.
    Cyclic,
    FieldAligned,
    Explicit(Vec3),
}

impl R0Choice {
    pub fn resolve(&self, model: &ModelSpec, t0: f64) -> Result<Vec3> {
        match self {
            R0Choice::Cyclic => match model.field.cyclic_r0(t0) {
                Some(r) => Ok(r),
                None => model.field.default_r0(t0),
            },
            R0Choice::FieldAligned => model.field.default_r0(t0),
            R0Choice::Explicit(r) => Ok(*r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRunOptions {
    pub r0: R0Choice,
    /// Midpoint steps per grid interval for the unitary path.
    pub substeps: usize,
    /// RK4 steps per grid interval for `R`.
    pub r_substeps: usize,
    pub phase: PhaseOptions,
    pub cap: usize,
}

impl Default for PhaseRunOptions {
    fn default() -> Self {
        PhaseRunOptions {
            r0: R0Choice::Cyclic,
            substeps: 1,
            r_substeps: 1,
            phase: PhaseOptions::default(),
            cap: DENSE_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseRun {
    pub records: Vec<PhaseRecord>,
    pub frame_check: FrameCheck,
    pub trajectory: RTrajectory,
}

/// Full pipeline for one model: `R`, eigenframe, `U_s`, phases.
pub fn run_phases(model: &ModelSpec, grid: &TimeGrid, opts: &PhaseRunOptions) -> Result<PhaseRun> {
    let r0 = opts.r0.resolve(model, grid.start())?;
    let r = solve_r_vector_with(
        &model.field,
        r0,
        grid,
        &RSolveOptions {
            substeps: opts.r_substeps,
            step_doubling: false,
        },
    )?;
    let frame = EigenFrame::new(&r, &model.system);
    let totals = TotalSpinMatrices::new(&model.system, opts.cap)?;
    let frame_check = frame.check(&totals)?;
    let ham = ModelHamiltonian::new(model, Part::Total, opts.cap)?;
    let path = propagate(&ham, grid, opts.substeps, "Hs")?;
    let records = compute_phases(&frame, &ham, &path, &opts.phase)?;
    Ok(PhaseRun {
        records,
        frame_check,
        trajectory: r,
    })
}

#[derive(Debug, Clone)]
pub struct PhaseComparison {
    pub a: Vec<PhaseRecord>,
    pub b: Vec<PhaseRecord>,
    /// `|γ_n^(a) − γ_n^(b)|` per label, with `γ = total − dynamical`.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

impl PhaseComparison {
    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.a.iter().map(|r| &r.label)
    }
}

/// Geometric phases of two models sharing system and field. Frames are
/// followed leniently so that control interactions yield a number rather
/// than a frame-following error.
pub fn compare_phases(model_a: &ModelSpec, model_b: &ModelSpec, grid: &TimeGrid, opts: &PhaseRunOptions) -> Result<PhaseComparison> {
    ensure_same_system(&model_a.system, &model_b.system)?;
    if model_a.field != model_b.field {
        return Err(Error::domain("compared models must share the field"));
    }
    let mut o = *opts;
    o.phase.policy = FramePolicy::Report;
    let a = run_phases(model_a, grid, &o)?.records;
    let b = run_phases(model_b, grid, &o)?.records;
    let deviations: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x.geometric_from_dynamics() - y.geometric_from_dynamics()).abs())
        .collect();
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(PhaseComparison {
        a,
        b,
        deviations,
        max_deviation,
    })
}
