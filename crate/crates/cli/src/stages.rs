//! One function per verification. Each returns its verdict, scalar metrics
//! and the tables it emits.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use lrspin::invariant::{
    invariant_spectrum_drift, lvn_residual, solve_r_vector_with, transport_operator, RSolveOptions, RTrajectory,
    TotalSpinMatrices,
};
use lrspin::model::total_spin_components;
use lrspin::phases::{compare_phases, run_phases, FramePolicy, PhaseOptions, PhaseRecord, PhaseRunOptions};
use lrspin::propagate::{
    extract_frames, factorization_deviation, per_site_product_check, propagate, propagate_model, propagate_sites,
    Hamiltonian, ModelHamiltonian, Part,
};
use lrspin::symmetry::{cross_validate, numeric_invariance_check, structural_check, StructuralVerdict};
use lrspin::tolerances::acceptance as tol;
use lrspin::algebra::embed_with_cap;
use lrspin::{build_interaction, DenseOperator, Error, ModelSpec, TimeGrid};

use crate::config::ScenarioConfig;
use crate::runner::{EXIT_NOT_APPLICABLE, EXIT_OK, EXIT_SYMMETRY};
use crate::table::{Cell, Table};

#[derive(Debug, Clone)]
pub struct StageOutput {
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub message: Option<String>,
    /// `(file stem, table)`.
    pub tables: Vec<(String, Table)>,
    /// `(file name, contents)` for outputs that are not tables.
    pub files: Vec<(String, String)>,
}

impl StageOutput {
    fn new(passed: bool) -> Self {
        StageOutput {
            passed,
            metrics: BTreeMap::new(),
            message: None,
            tables: Vec::new(),
            files: Vec::new(),
        }
    }

    fn metric(mut self, name: &str, v: f64) -> Self {
        self.metrics.insert(name.to_string(), v);
        self
    }
}

pub fn grid(cfg: &ScenarioConfig) -> Result<TimeGrid, Error> {
    TimeGrid::uniform(cfg.run.t_start, cfg.run.t_end, cfg.run.steps)
}

fn trajectory(cfg: &ScenarioConfig, grid: &TimeGrid) -> Result<RTrajectory, Error> {
    let r0 = cfg.invariant.r0.resolve(&cfg.model, grid.start())?;
    solve_r_vector_with(
        &cfg.model.field,
        r0,
        grid,
        &RSolveOptions {
            substeps: cfg.run.r_substeps,
            step_doubling: true,
        },
    )
}

fn fd_step(grid: &TimeGrid, divisor: usize) -> f64 {
    grid.min_spacing() / divisor as f64
}

fn max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Result of the rotational-invariance analysis of `H'`.
#[derive(Debug, Clone)]
pub struct SymmetryAnalysis {
    pub numeric_pass: bool,
    pub structural: StructuralVerdict,
    pub cross_agree: Option<bool>,
    pub output: StageOutput,
}

impl SymmetryAnalysis {
    /// `check-symmetry` exit code: 0 pass, 2 fail, 3 structurally not applicable.
    pub fn exit_code(&self) -> i32 {
        if !self.output.passed {
            EXIT_SYMMETRY
        } else if self.structural == StructuralVerdict::NotApplicable {
            EXIT_NOT_APPLICABLE
        } else {
            EXIT_OK
        }
    }
}

pub fn symmetry(cfg: &ScenarioConfig) -> Result<SymmetryAnalysis, Error> {
    let model = &cfg.model;
    let sys = &model.system;
    let cap = cfg.run.dense_cap;
    let times: Vec<f64> = if model.interaction.is_time_independent() {
        vec![cfg.run.t_start]
    } else {
        (0..5)
            .map(|k| cfg.run.t_start + (cfg.run.t_end - cfg.run.t_start) * k as f64 / 4.0)
            .collect()
    };
    let numeric = numeric_invariance_check(&model.interaction, sys, &times, cap)?;

    let mut lines = Vec::new();
    let mut verdicts = Vec::new();
    let mut n_violations = 0usize;
    let mut cross_agree: Option<bool> = None;
    let mut cross_cases = 0usize;
    for (label, comp) in cfg.interaction_labels.iter().zip(&model.interaction.components) {
        let report = structural_check(&comp.tensor, sys)?;
        verdicts.push(report.verdict);
        n_violations += report.violations.len();
        for v in &report.violations {
            lines.push(json!({
                "record": "violation",
                "block": label,
                "condition": v.condition.to_string(),
                "j": v.j,
                "k": v.k,
                "site_j": v.site_j,
                "site_k": v.site_k,
                "beta": v.beta.map(|a| a.label()),
                "gamma": v.gamma.map(|a| a.label()),
                "mu": v.mu.label(),
                "nu": v.nu.label(),
                "residual": v.residual,
            }));
        }
        if comp.tensor.order() == 2 && sys.all_spin_half() && cfg.checks.cross_validate_trials > 0 {
            let cv = cross_validate(&comp.tensor, sys, cfg.checks.cross_validate_trials, cfg.run.seed, cap)?;
            cross_cases += cv.cases.len();
            cross_agree = Some(cross_agree.unwrap_or(true) && cv.agree());
        }
    }
    let structural = if verdicts.contains(&StructuralVerdict::Fail) {
        StructuralVerdict::Fail
    } else if verdicts.contains(&StructuralVerdict::NotApplicable) {
        StructuralVerdict::NotApplicable
    } else {
        StructuralVerdict::Pass
    };
    let passed = numeric.pass && structural != StructuralVerdict::Fail && cross_agree != Some(false);
    lines.push(json!({
        "record": "summary",
        "numeric_pass": numeric.pass,
        "norms": numeric.norms,
        "tolerance": numeric.tolerance,
        "structural": structural.to_string(),
        "violations": n_violations,
        "cross_validate_agree": cross_agree,
        "cross_validate_cases": cross_cases,
        "pass": passed,
    }));
    let mut out = StageOutput::new(passed)
        .metric("norm_1", numeric.norms[0])
        .metric("norm_2", numeric.norms[1])
        .metric("norm_3", numeric.norms[2])
        .metric("tolerance", numeric.tolerance)
        .metric("violations", n_violations as f64)
        .metric("cross_validate_cases", cross_cases as f64);
    if !passed {
        let mut why = Vec::new();
        if !numeric.pass {
            why.push(format!("max commutator norm {:.3e} exceeds {:.3e}", max(numeric.norms), numeric.tolerance));
        }
        if structural == StructuralVerdict::Fail {
            why.push(format!("{n_violations} structural violations"));
        }
        if cross_agree == Some(false) {
            why.push("structural and numeric verdicts disagree on perturbed tensors".to_string());
        }
        out.message = Some(why.join("; "));
    }
    out.files.push(("symmetry.jsonl".into(), json_lines(&lines)));
    Ok(SymmetryAnalysis {
        numeric_pass: numeric.pass,
        structural,
        cross_agree,
        output: out,
    })
}

pub fn json_lines(records: &[Value]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

/// Residuals of the assembled invariant `R(t)·ΣS` against `H_0` and `H_s`.
pub fn invariant(cfg: &ScenarioConfig) -> Result<StageOutput, Error> {
    let model = &cfg.model;
    let cap = cfg.run.dense_cap;
    let grid = grid(cfg)?;
    let r = trajectory(cfg, &grid)?;
    let totals = TotalSpinMatrices::new(&model.system, cap)?;
    let h0 = ModelHamiltonian::new(model, Part::Dipole, cap)?;
    let hs = ModelHamiltonian::new(model, Part::Total, cap)?;
    let dt = fd_step(&grid, cfg.invariant.fd_divisor);
    let dom = (grid.start(), grid.end());
    let i0 = totals.dot(&r.initial())?;

    let mut table = Table::new(&[
        "t",
        "R1",
        "R2",
        "R3",
        "norm_R",
        "residual_H0",
        "residual_Hs",
        "spectrum_drift",
    ]);
    let mut worst_gap = 0.0f64;
    for (k, &t) in grid.times().iter().enumerate() {
        let rk = r.values()[k];
        let a = lvn_residual(|s| totals.dot(&r.flow_to(s)?), |s| h0.at(s), t, dt, dom)?;
        let b = lvn_residual(|s| totals.dot(&r.flow_to(s)?), |s| hs.at(s), t, dt, dom)?;
        worst_gap = worst_gap.max((b.value - a.value).abs());
        let drift = invariant_spectrum_drift(&[i0.clone(), totals.dot(&rk)?])?;
        table.push(vec![
            t.into(),
            rk[0].into(),
            rk[1].into(),
            rk[2].into(),
            rk.norm().into(),
            a.value.into(),
            b.value.into(),
            drift.into(),
        ]);
    }
    let res_h0 = table.column_max("residual_H0").unwrap_or(0.0);
    let res_hs = table.column_max("residual_Hs").unwrap_or(0.0);
    let drift = table.column_max("spectrum_drift").unwrap_or(0.0);
    let passed = res_h0 <= tol::LVN_RESIDUAL
        && res_hs <= tol::LVN_RESIDUAL
        && worst_gap <= tol::THEOREM_MATCH
        && drift <= tol::SPECTRUM_DRIFT;
    let mut out = StageOutput::new(passed)
        .metric("max_residual_H0", res_h0)
        .metric("max_residual_Hs", res_hs)
        .metric("max_residual_gap", worst_gap)
        .metric("max_spectrum_drift", drift)
        .metric("r_norm_drift", r.max_norm_drift())
        .metric("r_error_estimate", r.error_estimate().unwrap_or(f64::NAN));
    if !passed {
        out.message = Some(format!(
            "residual H0 {res_h0:.3e}, Hs {res_hs:.3e}, gap {worst_gap:.3e}, spectrum drift {drift:.3e}"
        ));
    }
    out.tables.push(("invariant".into(), table));
    Ok(out)
}

/// `‖U_s − U_0 U'‖_F` and unitarity of `U_s` per node.
pub fn factorization(cfg: &ScenarioConfig) -> Result<StageOutput, Error> {
    let grid = grid(cfg)?;
    let paths = propagate_model(&cfg.model, &grid, cfg.run.substeps, cfg.run.dense_cap)?;
    let rep = factorization_deviation(&paths);
    let mut table = Table::new(&["t", "unitarity", "factorization"]);
    for (k, &t) in grid.times().iter().enumerate() {
        table.push(vec![
            t.into(),
            paths.total.at(k).unitarity_defect().into(),
            rep.per_node[k].into(),
        ]);
    }
    let unitarity = paths.total.max_unitarity_defect();
    let passed = rep.max <= tol::FACTORIZATION;
    let mut out = StageOutput::new(passed)
        .metric("max_factorization", rep.max)
        .metric("max_unitarity", unitarity);
    if !passed {
        out.message = Some(format!("max ‖U_s − U_0 U'‖_F = {:.3e}", rep.max));
    }
    out.tables.push(("factorization".into(), table));
    Ok(out)
}

/// Per-site product structure, rotation frames and transport of `I(0)`.
pub fn frames(cfg: &ScenarioConfig) -> Result<StageOutput, Error> {
    let model = &cfg.model;
    let sys = &model.system;
    let cap = cfg.run.dense_cap;
    let grid = grid(cfg)?;
    let r = trajectory(cfg, &grid)?;

    let product = per_site_product_check(&model.field, sys, &grid, cfg.run.substeps, cap)?;
    let site_paths = propagate_sites(&model.field, sys, &grid, cfg.run.transport_substeps)?;
    let f = extract_frames(&site_paths, sys.spins(), &r)?;
    let dipole = ModelHamiltonian::new(&model.dipole_only(), Part::Dipole, cap)?;
    let u0 = propagate(&dipole, &grid, cfg.run.transport_substeps, "H0")?;
    let totals = TotalSpinMatrices::new(sys, cap)?;
    let i0 = totals.dot(&r.initial())?;

    let mut table = Table::new(&[
        "t",
        "per_site_product",
        "max_z_commutator",
        "conjugation_defect",
        "transport_error",
    ]);
    for (k, &t) in grid.times().iter().enumerate() {
        let moved = transport_operator(&i0, u0.at(k))?;
        let assembled = totals.dot(&r.values()[k])?;
        let err = (moved.matrix() - assembled.matrix()).norm();
        table.push(vec![
            t.into(),
            product.per_node[k].into(),
            f.z_commutator[k].into(),
            f.conjugation_defect[k].into(),
            err.into(),
        ]);
    }
    let m = |c| table.column_max(c).unwrap_or(0.0);
    let (prod, zc, conj, tr) = (
        m("per_site_product"),
        m("max_z_commutator"),
        m("conjugation_defect"),
        m("transport_error"),
    );
    let passed = prod <= tol::FACTORIZATION
        && zc <= tol::Z_COMMUTATOR
        && conj <= tol::FRAME_CONJUGATION
        && tr <= tol::TRANSPORT;
    let mut out = StageOutput::new(passed)
        .metric("max_per_site_product", prod)
        .metric("max_pair_commutator", product.max_pair_commutator)
        .metric("max_z_commutator", zc)
        .metric("max_conjugation_defect", conj)
        .metric("max_transport_error", tr)
        .metric("max_reassembly_error", f.max_reassembly_error(&site_paths))
        .metric("antipodal_nodes", f.antipodal.iter().filter(|&&a| a).count() as f64);
    if !passed {
        out.message = Some(format!(
            "per-site {prod:.3e}, [Z,S3] {zc:.3e}, conjugation {conj:.3e}, transport {tr:.3e}"
        ));
    }
    out.tables.push(("frames".into(), table));
    Ok(out)
}

/// Transport of `I(0) = ΣS³ + H'(t₀)` under `U_s`.
pub fn yan(cfg: &ScenarioConfig) -> Result<StageOutput, Error> {
    let model = &cfg.model;
    let cap = cfg.run.dense_cap;
    let grid = grid(cfg)?;
    let i0 = yan_initial(cfg)?;
    let hs = ModelHamiltonian::new(model, Part::Total, cap)?;
    let path = propagate(&hs, &grid, cfg.run.substeps, "Hs")?;
    let dt = fd_step(&grid, cfg.invariant.yan_fd_divisor);
    let dom = (grid.start(), grid.end());

    let mut table = Table::new(&["t", "residual", "spectrum_drift"]);
    for (k, &t) in grid.times().iter().enumerate() {
        let res = lvn_residual(
            |s| transport_operator(&i0, &path.evolve_to(&hs, s)?),
            |s| hs.at(s),
            t,
            dt,
            dom,
        )?;
        let drift = invariant_spectrum_drift(&[i0.clone(), transport_operator(&i0, path.at(k))?])?;
        table.push(vec![t.into(), res.value.into(), drift.into()]);
    }
    let res = table.column_max("residual").unwrap_or(0.0);
    let drift = table.column_max("spectrum_drift").unwrap_or(0.0);
    let passed = res <= tol::YAN_RESIDUAL && drift <= tol::SPECTRUM_DRIFT;
    let mut out = StageOutput::new(passed)
        .metric("max_residual", res)
        .metric("max_spectrum_drift", drift);
    if !passed {
        out.message = Some(format!("residual {res:.3e}, spectrum drift {drift:.3e}"));
    }
    out.tables.push(("yan".into(), table));
    Ok(out)
}

fn phase_options(cfg: &ScenarioConfig, policy: FramePolicy) -> PhaseRunOptions {
    PhaseRunOptions {
        r0: cfg.invariant.r0,
        substeps: cfg.run.phase_substeps,
        r_substeps: cfg.run.r_substeps,
        phase: PhaseOptions {
            policy,
            fd_divisor: cfg.invariant.fd_divisor,
        },
        cap: cfg.run.dense_cap,
    }
}

/// Dynamical/geometric decomposition under `H_s`, following frames strictly.
pub fn phases(cfg: &ScenarioConfig) -> Result<StageOutput, Error> {
    phases_with_records(cfg).map(|(out, _)| out)
}

/// As [`phases`], also returning the records when frames were followed.
pub fn phases_with_records(cfg: &ScenarioConfig) -> Result<(StageOutput, Option<Vec<PhaseRecord>>), Error> {
    let grid = grid(cfg)?;
    let run = match run_phases(&cfg.model, &grid, &phase_options(cfg, FramePolicy::Strict)) {
        Ok(run) => run,
        Err(e @ Error::FrameFollowing { .. }) => {
            let mut out = StageOutput::new(false);
            out.message = Some(e.to_string());
            return Ok((out, None));
        }
        Err(e) => return Err(e),
    };
    let mut table = Table::new(&["label", "total", "dynamical", "geometric", "residual"]);
    for rec in &run.records {
        table.push(vec![
            Cell::Text(rec.label.to_string()),
            rec.total.into(),
            rec.dynamical.into(),
            rec.geometric.into(),
            rec.residual.into(),
        ]);
    }
    let worst = max(run.records.iter().map(|r| r.residual.abs()));
    let overlap = run.records.iter().map(|r| r.min_overlap).fold(f64::INFINITY, f64::min);
    let passed = worst <= tol::PHASE_ADDITIVITY;
    let mut out = StageOutput::new(passed)
        .metric("max_abs_residual", worst)
        .metric("min_overlap", overlap)
        .metric("max_gram_defect", run.frame_check.max_gram_defect)
        .metric("max_eigen_defect", run.frame_check.max_eigen_defect);
    if !passed {
        out.message = Some(format!("max |total − dynamical − geometric| = {worst:.3e}"));
    }
    out.tables.push(("phases".into(), table));
    Ok((out, Some(run.records)))
}

/// Geometric phases under `H_s` against the dipole-only model.
pub fn phase_coincidence(cfg: &ScenarioConfig) -> Result<StageOutput, Error> {
    phase_coincidence_with(cfg, None)
}

/// As [`phase_coincidence`], reusing `H_s` records from a strict phase run.
/// Strict and lenient frame following give identical records whenever the
/// strict run succeeds.
pub fn phase_coincidence_with(cfg: &ScenarioConfig, hs: Option<&[PhaseRecord]>) -> Result<StageOutput, Error> {
    let grid = grid(cfg)?;
    let dipole: ModelSpec = cfg.model.dipole_only();
    let opts = phase_options(cfg, FramePolicy::Report);
    let (a, b, deviations, max_deviation) = match hs {
        Some(a) => {
            let b = run_phases(&dipole, &grid, &opts)?.records;
            let deviations: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x.geometric_from_dynamics() - y.geometric_from_dynamics()).abs())
                .collect();
            let m = max(deviations.iter().copied());
            (a.to_vec(), b, deviations, m)
        }
        None => {
            let cmp = compare_phases(&cfg.model, &dipole, &grid, &opts)?;
            (cmp.a, cmp.b, cmp.deviations, cmp.max_deviation)
        }
    };
    let mut table = Table::new(&["label", "geometric_Hs", "geometric_H0", "deviation"]);
    for ((x, y), d) in a.iter().zip(&b).zip(&deviations) {
        table.push(vec![
            Cell::Text(x.label.to_string()),
            x.geometric_from_dynamics().into(),
            y.geometric_from_dynamics().into(),
            (*d).into(),
        ]);
    }
    let passed = max_deviation <= tol::PHASE_COINCIDENCE;
    let mut out = StageOutput::new(passed).metric("max_deviation", max_deviation);
    if !passed {
        out.message = Some(format!("max geometric-phase deviation {max_deviation:.3e}"));
    }
    out.tables.push(("compare".into(), table));
    Ok(out)
}

/// Combined per-node propagation table for the `propagate` subcommand.
pub fn propagation_table(cfg: &ScenarioConfig) -> Result<Table, Error> {
    let f = factorization(cfg)?;
    let fr = frames(cfg)?;
    let (_, ft) = &f.tables[0];
    let (_, frt) = &fr.tables[0];
    let mut table = Table::new(&["t", "unitarity", "factorization", "per_site_product", "max_z_commutator"]);
    for (a, b) in ft.rows.iter().zip(&frt.rows) {
        table.push(vec![a[0].clone(), a[1].clone(), a[2].clone(), b[1].clone(), b[2].clone()]);
    }
    Ok(table)
}

/// `ΣS³ + H'(t₀)`.
pub fn yan_initial(cfg: &ScenarioConfig) -> Result<DenseOperator, Error> {
    let [_, _, s3] = total_spin_components(&cfg.model.system);
    let expr = s3 + build_interaction(&cfg.model.interaction, cfg.run.t_start)?;
    embed_with_cap(&expr, &cfg.model.system, cfg.run.dense_cap)
}
