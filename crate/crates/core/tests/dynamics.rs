use std::f64::consts::PI;
use std::sync::Arc;

use lrspin::invariant::*;
use lrspin::phases::*;
use lrspin::propagate::*;
use lrspin::tolerances::DENSE_CAP;
use lrspin::*;

fn chain(n: usize) -> Vec<(usize, usize)> {
    (0..n - 1).map(|i| (i, i + 1)).collect()
}

fn xxz(n: usize, delta: f64) -> CouplingTensor {
    let mut q = CouplingTensor::new(2).unwrap();
    for (i, j) in chain(n) {
        for (a, v) in [(Axis::X, 1.0), (Axis::Y, 1.0), (Axis::Z, delta)] {
            q.insert(vec![i, j], vec![a, a], v).unwrap();
            q.insert(vec![j, i], vec![a, a], v).unwrap();
        }
    }
    q
}

fn cone() -> FieldProfile {
    FieldProfile::rotating_cone(1.0, PI / 3.0, 0.2).unwrap()
}

fn model(n: usize, q: Option<CouplingTensor>) -> ModelSpec {
    let spec = match q {
        Some(q) => InteractionSpec::single(q, Schedule::Constant(-1.0)),
        None => InteractionSpec::none(),
    };
    ModelSpec::new(SpinSystem::spin_half(n).unwrap(), cone(), spec).unwrap()
}

fn period_grid(steps: usize) -> TimeGrid {
    TimeGrid::uniform(0.0, 2.0 * PI / 0.2, steps).unwrap()
}

#[test]
fn interaction_commutes_with_dipole_and_invariant() {
    let m = model(3, Some(heisenberg_tensor(&chain(3)).unwrap()));
    let grid = period_grid(200);
    let r = solve_r_vector(&m.field, m.field.default_r0(0.0).unwrap(), &grid).unwrap();
    let h0 = ModelHamiltonian::new(&m, Part::Dipole, DENSE_CAP).unwrap();
    let hp = ModelHamiltonian::new(&m, Part::Interaction, DENSE_CAP).unwrap();
    let totals = TotalSpinMatrices::new(&m.system, DENSE_CAP).unwrap();
    for k in (0..grid.len()).step_by(37) {
        let t = grid.times()[k];
        let a = h0.at(t).unwrap();
        let b = hp.at(t).unwrap();
        assert!(a.commutator(&b).unwrap().frobenius_norm() <= 1e-12);
        let i = totals.dot(&r.values()[k]).unwrap();
        assert!(i.commutator(&b).unwrap().frobenius_norm() <= 1e-12);
    }
}

#[test]
fn residual_unchanged_by_invariant_interaction() {
    let grid = period_grid(400);
    let run = |q: CouplingTensor| {
        let m = model(3, Some(q));
        let r = solve_r_vector(&m.field, m.field.default_r0(0.0).unwrap(), &grid).unwrap();
        let totals = TotalSpinMatrices::new(&m.system, DENSE_CAP).unwrap();
        let h0 = ModelHamiltonian::new(&m, Part::Dipole, DENSE_CAP).unwrap();
        let hs = ModelHamiltonian::new(&m, Part::Total, DENSE_CAP).unwrap();
        let dt = grid.min_spacing() / 64.0;
        let dom = (grid.start(), grid.end());
        let mut max_diff = 0.0f64;
        let mut max_res = 0.0f64;
        for &t in grid.times().iter().step_by(13) {
            let a = lvn_residual(|s| totals.dot(&r.flow_to(s)?), |s| h0.at(s), t, dt, dom).unwrap();
            let b = lvn_residual(|s| totals.dot(&r.flow_to(s)?), |s| hs.at(s), t, dt, dom).unwrap();
            max_diff = max_diff.max(b.value - a.value);
            max_res = max_res.max(a.value);
        }
        (max_diff, max_res)
    };
    let (diff, res) = run(heisenberg_tensor(&chain(3)).unwrap());
    assert!(diff <= 1e-10, "{diff}");
    assert!(res <= 1e-6);
    let (diff, _) = run(xxz(3, 2.0));
    assert!(diff > 1e-3, "{diff}");
}

#[test]
fn residual_decays_quadratically() {
    let grid = period_grid(500);
    let sys = SpinSystem::spin_half(2).unwrap();
    let r = solve_r_vector(&cone(), Vec3::new(0.2, 0.1, 0.9), &grid).unwrap();
    let totals = TotalSpinMatrices::new(&sys, DENSE_CAP).unwrap();
    let t = grid.times()[101];
    let res = |dt: f64| {
        lvn_residual(
            |s| totals.dot(&r.flow_to(s)?),
            |s| totals.dot(&cone().eval(s)?),
            t,
            dt,
            (grid.start(), grid.end()),
        )
        .unwrap()
        .value
    };
    let h = grid.min_spacing();
    let (a, b, c) = (res(h), res(h / 2.0), res(h / 4.0));
    assert!((a / b - 4.0).abs() < 0.2 && (b / c - 4.0).abs() < 0.2, "{a} {b} {c}");
}

#[test]
fn transported_r_vector_invariant_matches_assembly() {
    let m = model(2, None);
    let grid = period_grid(1000);
    let opts = RSolveOptions {
        substeps: 8,
        step_doubling: false,
    };
    let r0 = Vec3::new(0.3, -0.4, 0.5);
    let r = solve_r_vector_with(&m.field, r0, &grid, &opts).unwrap();
    let path = propagate(&ModelHamiltonian::new(&m, Part::Dipole, DENSE_CAP).unwrap(), &grid, 256, "H0").unwrap();
    let ops = transported_invariant(&InvariantChoice::RVector(r0), &m.system, &path, DENSE_CAP).unwrap();
    assert_eq!(ops[0].matrix(), embed(&assemble_invariant(&r, &m.system, 0.0).unwrap(), &m.system).unwrap().matrix());
    for (k, op) in ops.iter().enumerate() {
        let assembled = embed(&assemble_invariant(&r, &m.system, grid.times()[k]).unwrap(), &m.system).unwrap();
        assert!((op.matrix() - assembled.matrix()).norm() <= 1e-8);
    }
    assert!(invariant_spectrum_drift(&ops).unwrap() <= 1e-9);
}

#[test]
fn yan_invariant_on_heisenberg_chain() {
    let q = heisenberg_tensor(&chain(3)).unwrap();
    let m = model(3, Some(q.clone()));
    let grid = period_grid(2000);
    let hs = ModelHamiltonian::new(&m, Part::Total, DENSE_CAP).unwrap();
    let path = propagate(&hs, &grid, 1, "Hs").unwrap();
    let choice = InvariantChoice::Yan(q);
    let i0 = initial_invariant(&choice, &m.system, DENSE_CAP).unwrap();
    let ops = transported_invariant(&choice, &m.system, &path, DENSE_CAP).unwrap();
    assert!(invariant_spectrum_drift(&ops).unwrap() <= 1e-9);
    let dt = grid.min_spacing() / 128.0;
    for &t in grid.times().iter().step_by(200) {
        let res = lvn_residual(
            |s| transport_operator(&i0, &path.evolve_to(&hs, s)?),
            |s| hs.at(s),
            t,
            dt,
            (grid.start(), grid.end()),
        )
        .unwrap();
        assert!(res.value <= 1e-8, "t={t} {}", res.value);
    }
}

#[test]
fn factorization_holds_for_heisenberg_only() {
    let grid = period_grid(500);
    let f = factorization_check(&model(3, Some(heisenberg_tensor(&chain(3)).unwrap())), &grid, 1, DENSE_CAP).unwrap();
    assert!(f.max <= 1e-6, "{}", f.max);
    let c = factorization_check(&model(3, Some(xxz(3, 2.0))), &grid, 1, DENSE_CAP).unwrap();
    assert!(c.max > 1e-2, "{}", c.max);
}

#[test]
fn per_site_product_reproduces_dipole_evolution() {
    let sys = SpinSystem::spin_half(3).unwrap();
    let r = per_site_product_check(&cone(), &sys, &period_grid(2000), 1, DENSE_CAP).unwrap();
    assert!(r.max <= 1e-7, "{}", r.max);
    assert!(r.max_pair_commutator <= 1e-12);
}

#[test]
fn frames_reproduce_assembled_invariant() {
    let n = 3;
    let sys = SpinSystem::spin_half(n).unwrap();
    let field = cone();
    let grid = period_grid(500);
    let r = solve_r_vector(&field, field.cyclic_r0(0.0).unwrap(), &grid).unwrap();
    let paths = propagate_sites(&field, &sys, &grid, 1).unwrap();
    let f = extract_frames(&paths, sys.spins(), &r).unwrap();
    assert!(f.max_conjugation_defect() <= 1e-10);
    let s3 = single_spin_matrix(Spin::HALF, Axis::Z).into_matrix();
    for k in (0..grid.len()).step_by(25) {
        let mut sum = CMatrix::zeros(sys.dim(), sys.dim());
        for i in 0..n {
            let w = embed_site(f.w[i][k].matrix(), &sys, i);
            sum += &w * embed_site(&s3, &sys, i) * w.adjoint();
        }
        let assembled = embed(&assemble_invariant(&r, &sys, grid.times()[k]).unwrap(), &sys).unwrap();
        assert!((sum - assembled.matrix()).norm() <= 1e-10);
    }
}

#[test]
fn generators_reconstruct_site_unitaries() {
    let sys = SpinSystem::spin_half(1).unwrap();
    let field = cone();
    let grid = period_grid(200);
    let r = solve_r_vector(&field, field.default_r0(0.0).unwrap(), &grid).unwrap();
    let paths = propagate_sites(&field, &sys, &grid, 1).unwrap();
    let f = extract_frames(&paths, sys.spins(), &r).unwrap();
    for g in f.rho[0].as_ref().unwrap() {
        assert!(g.reconstruction_error <= 1e-10);
        assert!(g.rho.norm() <= 2.0 * PI + 1e-12);
    }
}

fn phase_opts() -> PhaseRunOptions {
    PhaseRunOptions {
        substeps: 16,
        r_substeps: 2,
        ..Default::default()
    }
}

#[test]
fn single_spin_cyclic_phase_two_ways() {
    let m = model(1, None);
    let run = run_phases(&m, &period_grid(1000), &phase_opts()).unwrap();
    for rec in &run.records {
        assert!((rec.geometric - rec.geometric_from_dynamics()).abs() <= 1e-5);
    }
    let r0 = m.field.cyclic_r0(0.0).unwrap();
    // Berry phase of the co-rotating frame: ∓π(1 − cos θ_R).
    let expect = -PI * (1.0 - r0[2]);
    assert!((run.records[0].geometric - expect).abs() <= 1e-6, "{} {}", run.records[0].geometric, expect);
    assert!((run.records[1].geometric + expect).abs() <= 1e-6);
}

#[test]
fn adiabatic_sweep_approaches_cone_solid_angle() {
    let theta = PI / 3.0;
    let target = -PI * (1.0 - theta.cos());
    let mut errors = Vec::new();
    for omega in [0.2, 0.1, 0.05] {
        let field = FieldProfile::rotating_cone(1.0, theta, omega).unwrap();
        let m = ModelSpec::new(SpinSystem::spin_half(1).unwrap(), field, InteractionSpec::none()).unwrap();
        let grid = TimeGrid::uniform(0.0, 2.0 * PI / omega, 1000).unwrap();
        let run = run_phases(&m, &grid, &phase_opts()).unwrap();
        errors.push((run.records[0].geometric_from_dynamics() - target).abs());
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn heisenberg_geometric_phases_match_dipole() {
    let grid = period_grid(500);
    let heis = model(3, Some(heisenberg_tensor(&chain(3)).unwrap()));
    let cmp = compare_phases(&heis, &heis.dipole_only(), &grid, &phase_opts()).unwrap();
    assert!(cmp.max_deviation <= 1e-8, "{}", cmp.max_deviation);
    let same = compare_phases(&heis, &heis, &grid, &phase_opts()).unwrap();
    assert_eq!(same.max_deviation, 0.0);
    let ctrl = model(3, Some(xxz(3, 2.0)));
    let cmp = compare_phases(&ctrl, &ctrl.dipole_only(), &grid, &phase_opts()).unwrap();
    assert!(cmp.max_deviation > 1e-3, "{}", cmp.max_deviation);
}

#[test]
fn control_interaction_breaks_frame_following() {
    let m = model(2, Some(xxz(2, 2.0)));
    let err = run_phases(&m, &period_grid(300), &phase_opts()).unwrap_err();
    assert!(matches!(err, Error::FrameFollowing { .. }), "{err:?}");
}

#[test]
fn geometric_phase_is_gauge_invariant_on_closed_loops() {
    let m = model(2, None);
    let grid = period_grid(800);
    let t_end = grid.end();
    let r = solve_r_vector(&m.field, m.field.cyclic_r0(0.0).unwrap(), &grid).unwrap();
    let ham = ModelHamiltonian::new(&m, Part::Total, DENSE_CAP).unwrap();
    let path = propagate(&ham, &grid, 8, "Hs").unwrap();
    let plain = compute_phases(&EigenFrame::new(&r, &m.system), &ham, &path, &PhaseOptions::default()).unwrap();
    let gauge: Gauge = Arc::new(move |t: f64| 0.7 * (PI * t / t_end).sin().powi(2));
    let framed = EigenFrame::new(&r, &m.system).with_gauge(gauge);
    let gauged = compute_phases(&framed, &ham, &path, &PhaseOptions::default()).unwrap();
    for (a, b) in plain.iter().zip(&gauged) {
        assert!((a.geometric - b.geometric).abs() < 1e-6);
    }
}

#[test]
fn product_frame_phases_add_over_sites() {
    let grid = period_grid(500);
    let single = run_phases(&model(1, None), &grid, &phase_opts()).unwrap().records;
    let multi = run_phases(&model(3, None), &grid, &phase_opts()).unwrap().records;
    for rec in &multi {
        let sum: f64 = rec
            .label
            .twice_m()
            .iter()
            .map(|&m| if m > 0 { single[0].geometric } else { single[1].geometric })
            .sum();
        assert!((rec.geometric - sum).abs() <= 1e-7, "{} {} {}", rec.label, rec.geometric, sum);
        assert!(rec.residual.abs() <= 1e-6);
    }
}
