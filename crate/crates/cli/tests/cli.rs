use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lrspin_cli::runner::{run_scenario, sha256_hex};
use lrspin_cli::{parse_config, CheckName, Format, Status};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.cfg"))
}

fn lrspin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrspin")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const PAIR: &str = "\
[scenario]
name = pair
[system]
sites = 2
[field]
kind = rotating-cone
cone_angle_deg = 60
angular_frequency = 0.2
[interaction.h]
lambda = -1
heisenberg = 0-1
[run]
periods = 1
steps = 2000
";

#[test]
fn bundled_scenarios_validate() {
    for name in ["heisenberg_n4", "xxz_control", "single_spin"] {
        let text = fs::read_to_string(scenario(name)).unwrap();
        let cfg = parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(cfg.name, name);
        let o = lrspin(&["validate", "--config", scenario(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains(&format!("scenario.name = {name}")));
    }
}

#[test]
fn xxz_control_declares_its_failures() {
    let cfg = parse_config(&fs::read_to_string(scenario("xxz_control")).unwrap()).unwrap();
    for c in [CheckName::Symmetry, CheckName::Factorization, CheckName::PhaseCoincidence] {
        assert!(cfg.checks.expect_fail.contains(&c));
    }
}

#[test]
fn config_errors_exit_64_with_locations() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_cfg(tmp.path(), "bad.cfg", &PAIR.replace("steps = 2000", "steps = 1\nwobble = 3"));
    let o = lrspin(&["run", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(64));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("run.steps"), "{err}");
    assert!(err.contains("run.wobble: unknown key"), "{err}");
    let missing = lrspin(&["validate", "--config", tmp.path().join("absent.cfg").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(64));
    let usage = lrspin(&["run"]);
    assert_eq!(usage.status.code(), Some(64));
    let o = lrspin(&["validate", "--config", scenario("single_spin").to_str().unwrap(), "--steps", "1"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn invariant_csv_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_cfg(tmp.path(), "pair.cfg", PAIR);
    let o = lrspin(&["invariant", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,R1,R2,R3,norm_R,residual_H0,residual_Hs,spectrum_drift");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2001);
    let first: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(first.len(), 8);
    assert_eq!(first[0], "0.0000000000000000e0");
    let norm: f64 = first[4].parse().unwrap();
    assert!((norm - 1.0).abs() < 1e-12);
}

#[test]
fn propagate_and_json_format() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_cfg(tmp.path(), "pair.cfg", PAIR);
    let out = tmp.path().join("out");
    let o = lrspin(&["propagate", "--config", p.to_str().unwrap(), "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("propagate.json")).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2001);
    for key in ["t", "unitarity", "factorization", "per_site_product", "max_z_commutator"] {
        assert!(rows[10][key].is_number(), "{key}");
    }
    assert!(rows.iter().all(|r| r["factorization"].as_f64().unwrap() < 1e-6));
}

#[test]
fn phases_csv_has_one_row_per_label() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_cfg(tmp.path(), "pair.cfg", PAIR);
    let o = lrspin(&["phases", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "label,total,dynamical,geometric,residual");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("+1/2 +1/2,"));
}

#[test]
fn check_symmetry_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = write_cfg(tmp.path(), "ok.cfg", PAIR);
    assert_eq!(lrspin(&["check-symmetry", "--config", ok.to_str().unwrap()]).status.code(), Some(0));

    let o = lrspin(&["check-symmetry", "--config", scenario("xxz_control").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(records.len() > 1);
    assert!(records[..records.len() - 1].iter().all(|r| r["record"] == "violation"));
    assert_eq!(records.last().unwrap()["record"], "summary");

    let spin_one = write_cfg(tmp.path(), "one.cfg", &PAIR.replace("sites = 2", "sites = 2\nspin = 1"));
    assert_eq!(lrspin(&["check-symmetry", "--config", spin_one.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn run_is_deterministic_and_manifest_is_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_cfg(tmp.path(), "pair.cfg", &format!("{PAIR}[output]\nformats = csv json\n"));
    let mut manifests = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let o = lrspin(&["run", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        let mut listed: Vec<String> = Vec::new();
        for e in report["manifest"].as_array().unwrap() {
            let path = e["path"].as_str().unwrap();
            let bytes = fs::read(out.join(path)).unwrap();
            assert_eq!(sha256_hex(&bytes), e["sha256"].as_str().unwrap());
            assert_eq!(bytes.len() as u64, e["bytes"].as_u64().unwrap());
            listed.push(format!("{path} {}", e["sha256"].as_str().unwrap()));
        }
        let mut on_disk: Vec<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != "report.json")
            .collect();
        on_disk.sort();
        let mut names: Vec<String> = listed.iter().map(|l| l.split(' ').next().unwrap().to_string()).collect();
        names.sort();
        assert_eq!(names, on_disk);
        assert!(report["wall_time_s"]["symmetry"].is_number());
        manifests.push(listed);
    }
    assert_eq!(manifests[0], manifests[1]);
}

#[test]
fn dependent_checks_are_skipped_after_undeclared_symmetry_failure() {
    let text = fs::read_to_string(scenario("xxz_control")).unwrap();
    let text: String = text.lines().filter(|l| !l.starts_with("expect_fail")).map(|l| format!("{l}\n")).collect();
    let mut cfg = parse_config(&text).unwrap();
    cfg.set_steps(100).unwrap();
    cfg.checks.enabled.remove(&CheckName::Frames);
    cfg.checks.enabled.remove(&CheckName::Yan);
    let run = run_scenario(&cfg);
    let status = |c: CheckName| run.summary.checks.iter().find(|r| r.name == c).unwrap().status;
    assert_eq!(status(CheckName::Symmetry), Status::Fail);
    assert_eq!(status(CheckName::Invariant), Status::Skipped);
    assert_eq!(status(CheckName::Factorization), Status::Skipped);
    assert_eq!(status(CheckName::PhaseCoincidence), Status::Skipped);
    assert_eq!(status(CheckName::Phases), Status::Fail);
    assert_eq!(run.summary.exit_code, 2);
    let files: Vec<String> = run.files(&[Format::Csv]).into_iter().map(|(n, _)| n).collect();
    assert!(files.contains(&"symmetry.jsonl".to_string()));
    assert!(!files.contains(&"factorization.csv".to_string()));
}

#[test]
fn seed_override_keeps_symmetry_output() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_cfg(tmp.path(), "pair.cfg", PAIR);
    let a = lrspin(&["check-symmetry", "--config", p.to_str().unwrap(), "--seed", "1"]);
    let b = lrspin(&["check-symmetry", "--config", p.to_str().unwrap(), "--seed", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
}
