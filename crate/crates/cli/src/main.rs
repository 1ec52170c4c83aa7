use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lrspin_cli::runner::{self, EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_UNEXPECTED};
use lrspin_cli::stages::{self, StageOutput};
use lrspin_cli::table::Table;
use lrspin_cli::{parse_config, CheckName, Format, ScenarioConfig, Status};

#[derive(Parser)]
#[command(name = "lrspin", version, about = "Dynamical invariants and geometric phases of spin Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override `run.steps`.
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Output directory (stdout when omitted, except for `run`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Table format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Override `run.seed`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Declare a check as expected to fail (repeatable).
    #[arg(long = "expect-fail", value_name = "CHECKNAME")]
    expect_fail: Vec<CheckName>,
}

#[derive(Subcommand)]
enum Command {
    /// Rotational invariance of the interaction; violations as JSON lines.
    CheckSymmetry(Common),
    /// Per-step R(t) and Liouville-von Neumann residuals.
    Invariant(Common),
    /// Per-step unitarity, factorization, per-site product and frame residuals.
    Propagate(Common),
    /// Per-label phase decomposition.
    Phases(Common),
    /// Geometric phases with and without the interaction.
    Compare(Common),
    /// Full pipeline with report.json and a hashed manifest.
    Run(Common),
    /// Parse and validate the scenario only.
    Validate(Common),
}

fn load(common: &Common) -> Result<ScenarioConfig, i32> {
    let text = fs::read_to_string(&common.config).map_err(|e| {
        eprintln!("{}: {e}", common.config.display());
        EXIT_CONFIG
    })?;
    let mut cfg = parse_config(&text).map_err(|errs| {
        eprintln!("{}: invalid scenario", common.config.display());
        for e in &errs.0 {
            eprintln!("  {e}");
        }
        EXIT_CONFIG
    })?;
    if let Some(steps) = common.steps {
        cfg.set_steps(steps).map_err(|errs| {
            eprintln!("--steps: {errs}");
            EXIT_CONFIG
        })?;
    }
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    cfg.checks.expect_fail.extend(common.expect_fail.iter().copied());
    Ok(cfg)
}

fn emit(common: &Common, file: &str, contents: &str) -> i32 {
    match &common.out {
        Some(dir) => {
            let path = dir.join(file);
            match fs::create_dir_all(dir).and_then(|_| fs::write(&path, contents)) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    eprintln!("{}: {e}", path.display());
                    EXIT_IO
                }
            }
        }
        None => {
            let mut stdout = io::stdout().lock();
            match stdout.write_all(contents.as_bytes()).and_then(|_| stdout.flush()) {
                Ok(()) => EXIT_OK,
                Err(_) => EXIT_IO,
            }
        }
    }
}

fn emit_table(common: &Common, stem: &str, table: &Table) -> i32 {
    let f = common.format.unwrap_or(Format::Csv);
    emit(common, &format!("{stem}.{}", f.extension()), &table.render(f))
}

/// Verdict line on stderr and exit code for a single-stage subcommand.
fn verdict(cfg: &ScenarioConfig, name: CheckName, out: &StageOutput) -> i32 {
    let status = Status::resolve(out.passed, cfg.checks.expect_fail.contains(&name));
    match &out.message {
        Some(m) => eprintln!("{name}: {status} ({m})"),
        None => eprintln!("{name}: {status}"),
    }
    if status.as_expected() {
        EXIT_OK
    } else {
        EXIT_UNEXPECTED
    }
}

fn stage_command(common: &Common, name: CheckName) -> i32 {
    let cfg = match load(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let result = match name {
        CheckName::Invariant => stages::invariant(&cfg),
        CheckName::Phases => stages::phases(&cfg),
        CheckName::PhaseCoincidence => stages::phase_coincidence(&cfg),
        _ => unreachable!("only table stages are dispatched here"),
    };
    let out = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{name}: error: {e}");
            return EXIT_UNEXPECTED;
        }
    };
    for (stem, table) in &out.tables {
        let code = emit_table(common, stem, table);
        if code != EXIT_OK {
            return code;
        }
    }
    verdict(&cfg, name, &out)
}

fn check_symmetry(common: &Common) -> i32 {
    let cfg = match load(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let analysis = match stages::symmetry(&cfg) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("symmetry: error: {e}");
            return EXIT_UNEXPECTED;
        }
    };
    for (file, contents) in &analysis.output.files {
        let code = emit(common, file, contents);
        if code != EXIT_OK {
            return code;
        }
    }
    let code = analysis.exit_code();
    eprintln!(
        "symmetry: numeric {}, structural {}",
        if analysis.numeric_pass { "pass" } else { "fail" },
        analysis.structural
    );
    code
}

fn propagate(common: &Common) -> i32 {
    let cfg = match load(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match stages::propagation_table(&cfg) {
        Ok(t) => emit_table(common, "propagate", &t),
        Err(e) => {
            eprintln!("propagate: error: {e}");
            EXIT_UNEXPECTED
        }
    }
}

fn run(common: &Common) -> i32 {
    let cfg = match load(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let dir = common.out.clone().unwrap_or_else(|| runner::default_output_dir(&cfg));
    let formats: Vec<Format> = match common.format {
        Some(f) => vec![f],
        None => cfg.output.formats.iter().copied().collect(),
    };
    let result = runner::run_scenario(&cfg);
    if let Err(e) = result.write(&dir, &formats) {
        eprintln!("{}: {e}", dir.display());
        return EXIT_IO;
    }
    for c in &result.summary.checks {
        match &c.message {
            Some(m) => println!("{:<18} {:<16} {m}", c.name.as_str(), c.status.as_str()),
            None => println!("{:<18} {}", c.name.as_str(), c.status.as_str()),
        }
    }
    println!("report: {}", dir.join(runner::REPORT_FILE).display());
    result.summary.exit_code
}

fn validate(common: &Common) -> i32 {
    match load(common) {
        Ok(cfg) => {
            for (k, v) in lrspin_cli::config::describe(&cfg) {
                println!("{k} = {v}");
            }
            EXIT_OK
        }
        Err(code) => code,
    }
}

fn dispatch(cmd: &Command) -> i32 {
    match cmd {
        Command::CheckSymmetry(c) => check_symmetry(c),
        Command::Invariant(c) => stage_command(c, CheckName::Invariant),
        Command::Propagate(c) => propagate(c),
        Command::Phases(c) => stage_command(c, CheckName::Phases),
        Command::Compare(c) => stage_command(c, CheckName::PhaseCoincidence),
        Command::Run(c) => run(c),
        Command::Validate(c) => validate(c),
    }
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return exit(if usage { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    exit(dispatch(&cli.command))
}
