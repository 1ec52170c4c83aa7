//! Full-pipeline runs, exit-code aggregation and result files.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lrspin::phases::PhaseRecord;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checks::{CheckName, Format, Status};
use crate::config::{describe, ScenarioConfig};
use crate::stages::{self, StageOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNEXPECTED: i32 = 1;
pub const EXIT_SYMMETRY: i32 = 2;
pub const EXIT_NOT_APPLICABLE: i32 = 3;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_IO: i32 = 74;

pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: CheckName,
    pub status: Status,
    pub expected_fail: bool,
    /// Non-finite values serialize as `null`.
    pub metrics: BTreeMap<String, f64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Deterministic part of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub exit_code: i32,
    pub checks: Vec<CheckRecord>,
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub summary: Summary,
    /// Every emitted file except this report.
    pub manifest: Vec<ManifestEntry>,
    /// Seconds per stage; not part of the deterministic output.
    pub wall_time_s: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub summary: Summary,
    outputs: Vec<StageOutput>,
    pub wall_time_s: BTreeMap<String, f64>,
}

pub fn exit_code(checks: &[CheckRecord]) -> i32 {
    if checks.iter().any(|c| c.name == CheckName::Symmetry && c.status == Status::Fail) {
        EXIT_SYMMETRY
    } else if checks.iter().all(|c| c.status.as_expected()) {
        EXIT_OK
    } else {
        EXIT_UNEXPECTED
    }
}

fn stage(
    cfg: &ScenarioConfig,
    name: CheckName,
    phase_records: &mut Option<Vec<PhaseRecord>>,
) -> Result<StageOutput, lrspin::Error> {
    match name {
        CheckName::Symmetry => stages::symmetry(cfg).map(|a| a.output),
        CheckName::Invariant => stages::invariant(cfg),
        CheckName::Factorization => stages::factorization(cfg),
        CheckName::Frames => stages::frames(cfg),
        CheckName::Yan => stages::yan(cfg),
        CheckName::Phases => {
            let (out, records) = stages::phases_with_records(cfg)?;
            *phase_records = records;
            Ok(out)
        }
        CheckName::PhaseCoincidence => stages::phase_coincidence_with(cfg, phase_records.as_deref()),
    }
}

/// Runs every enabled check in pipeline order. A check whose dependency
/// failed unexpectedly, errored or was skipped is skipped.
pub fn run_scenario(cfg: &ScenarioConfig) -> ScenarioRun {
    let mut checks: Vec<CheckRecord> = Vec::new();
    let mut outputs = Vec::new();
    let mut wall = BTreeMap::new();
    let mut phase_records = None;
    for name in CheckName::ALL {
        if !cfg.checks.enabled.contains(&name) {
            continue;
        }
        let expected_fail = cfg.checks.expect_fail.contains(&name);
        let blocked: Vec<&str> = name
            .depends_on()
            .iter()
            .filter_map(|d| checks.iter().find(|c| c.name == *d))
            .filter(|c| !c.status.usable())
            .map(|c| c.name.as_str())
            .collect();
        if !blocked.is_empty() {
            checks.push(CheckRecord {
                name,
                status: Status::Skipped,
                expected_fail,
                metrics: BTreeMap::new(),
                message: Some(format!("depends on {}", blocked.join(", "))),
            });
            continue;
        }
        let start = Instant::now();
        let result = stage(cfg, name, &mut phase_records);
        wall.insert(name.as_str().to_string(), start.elapsed().as_secs_f64());
        match result {
            Ok(out) => {
                checks.push(CheckRecord {
                    name,
                    status: Status::resolve(out.passed, expected_fail),
                    expected_fail,
                    metrics: out.metrics.clone(),
                    message: out.message.clone(),
                });
                outputs.push(out);
            }
            Err(e) => checks.push(CheckRecord {
                name,
                status: Status::Error,
                expected_fail,
                metrics: BTreeMap::new(),
                message: Some(e.to_string()),
            }),
        }
    }
    ScenarioRun {
        summary: Summary {
            scenario: cfg.name.clone(),
            exit_code: exit_code(&checks),
            checks,
            config: describe(cfg),
        },
        outputs,
        wall_time_s: wall,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ScenarioRun {
    /// `(file name, contents)` for every result file, in emission order.
    pub fn files(&self, formats: &[Format]) -> Vec<(String, String)> {
        let mut files = Vec::new();
        for out in &self.outputs {
            for (stem, table) in &out.tables {
                for &f in formats {
                    files.push((format!("{stem}.{}", f.extension()), table.render(f)));
                }
            }
            files.extend(out.files.iter().cloned());
        }
        let mut summary = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        summary.push('\n');
        files.push((SUMMARY_FILE.to_string(), summary));
        files
    }

    /// Writes result files, then `report.json` with the manifest.
    pub fn write(&self, dir: &Path, formats: &[Format]) -> io::Result<RunReport> {
        fs::create_dir_all(dir)?;
        let mut manifest = Vec::new();
        for (name, contents) in self.files(formats) {
            fs::write(dir.join(&name), &contents)?;
            manifest.push(ManifestEntry {
                path: name,
                bytes: contents.len(),
                sha256: sha256_hex(contents.as_bytes()),
            });
        }
        let report = RunReport {
            summary: self.summary.clone(),
            manifest,
            wall_time_s: self.wall_time_s.clone(),
        };
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        fs::write(dir.join(REPORT_FILE), text)?;
        Ok(report)
    }
}

pub fn default_output_dir(cfg: &ScenarioConfig) -> PathBuf {
    cfg.output
        .directory
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name))
}
