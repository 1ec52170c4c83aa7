//! Scenario documents.
//!
//! A scenario is a line-oriented text file made of `[section]` headers,
//! `key = value` pairs and, inside `[interaction.<label>]` blocks, bare tensor
//! entry rows. `#` starts a comment. The grammar is documented in
//! `docs/config-format.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use lrspin::phases::R0Choice;
use lrspin::tolerances::DENSE_CAP;
use lrspin::{
    heisenberg_tensor, Axis, CouplingTensor, FieldProfile, InteractionComponent, InteractionSpec, ModelSpec,
    Schedule, Spin, SpinSystem, Vec3,
};

use crate::checks::{CheckName, Format};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, 0 when the error concerns the document as a whole.
    pub line: usize,
    /// Dotted `section.key` path.
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}: {}", self.line, self.field, self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    /// Midpoint steps per interval for `U_s`, `U_0`, `U'`.
    pub substeps: usize,
    /// Midpoint steps per interval for the frame and transport checks.
    pub transport_substeps: usize,
    /// Midpoint steps per interval for the phase runs.
    pub phase_substeps: usize,
    /// RK4 steps per interval for `R`.
    pub r_substeps: usize,
    pub dense_cap: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSpec {
    pub r0: R0Choice,
    /// `dt_fd = spacing / fd_divisor` for residuals and connections.
    pub fd_divisor: usize,
    /// Finite-difference divisor for the transported (Yan) invariant.
    pub yan_fd_divisor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChecksSpec {
    pub enabled: BTreeSet<CheckName>,
    pub expect_fail: BTreeSet<CheckName>,
    pub cross_validate_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub directory: Option<PathBuf>,
    pub formats: BTreeSet<Format>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: Option<String>,
    pub model: ModelSpec,
    /// Interaction block labels, in document order.
    pub interaction_labels: Vec<String>,
    pub run: RunSpec,
    pub invariant: InvariantSpec,
    pub checks: ChecksSpec,
    pub output: OutputSpec,
}

impl ScenarioConfig {
    /// Re-validates after command-line overrides.
    pub fn set_steps(&mut self, steps: usize) -> Result<(), ConfigErrors> {
        if steps < 2 {
            return Err(ConfigErrors(vec![ConfigError {
                line: 0,
                field: "run.steps".into(),
                message: format!("must be at least 2, got {steps}"),
            }]));
        }
        self.run.steps = steps;
        Ok(())
    }
}

#[derive(Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
    rows: Vec<(usize, String)>,
}

fn split_document(text: &str, errs: &mut Vec<ConfigError>) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => {
                    let name = name.trim().to_string();
                    if sections.iter().any(|s| s.name == name) {
                        errs.push(err(line, &name, "duplicate section"));
                    }
                    sections.push(Section {
                        name,
                        line,
                        entries: Vec::new(),
                        rows: Vec::new(),
                    });
                }
                _ => errs.push(err(line, "document", format!("malformed section header `{content}`"))),
            }
            continue;
        }
        let Some(section) = sections.last_mut() else {
            errs.push(err(line, "document", "content before the first section header"));
            continue;
        };
        match content.split_once('=') {
            Some((key, value)) => {
                let key = key.trim();
                if key.is_empty() || key.contains(char::is_whitespace) {
                    errs.push(err(line, &section.name, format!("malformed key `{key}`")));
                    continue;
                }
                section.entries.push(Entry {
                    key: key.to_string(),
                    value: value.trim().to_string(),
                    line,
                });
            }
            None if section.name.starts_with("interaction.") => section.rows.push((line, content.to_string())),
            None => errs.push(err(line, &section.name, format!("expected `key = value`, found `{content}`"))),
        }
    }
    sections
}

fn err(line: usize, field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        field: field.into(),
        message: message.into(),
    }
}

/// Keyed view of one section with unknown-key and duplicate detection.
struct Keys<'a> {
    section: &'a Section,
    used: BTreeSet<String>,
}

impl<'a> Keys<'a> {
    fn new(section: &'a Section, allowed: &[&str], repeatable: &[&str], errs: &mut Vec<ConfigError>) -> Self {
        let mut seen = BTreeSet::new();
        for e in &section.entries {
            if !allowed.contains(&e.key.as_str()) {
                errs.push(err(e.line, format!("{}.{}", section.name, e.key), "unknown key"));
            } else if !repeatable.contains(&e.key.as_str()) && !seen.insert(e.key.clone()) {
                errs.push(err(e.line, format!("{}.{}", section.name, e.key), "duplicate key"));
            }
        }
        Keys {
            section,
            used: BTreeSet::new(),
        }
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{}", self.section.name, key)
    }

    fn get(&mut self, key: &str) -> Option<&'a Entry> {
        self.used.insert(key.to_string());
        self.section.entries.iter().find(|e| e.key == key)
    }

    fn all(&mut self, key: &str) -> Vec<&'a Entry> {
        self.used.insert(key.to_string());
        self.section.entries.iter().filter(|e| e.key == key).collect()
    }

    fn has(&self, key: &str) -> bool {
        self.section.entries.iter().any(|e| e.key == key)
    }

    /// Keys that are valid for the section but not for the selected variant.
    fn reject_unused(&self, context: &str, errs: &mut Vec<ConfigError>) {
        for e in &self.section.entries {
            if !self.used.contains(&e.key) {
                errs.push(err(e.line, self.field(&e.key), format!("not used by {context}")));
            }
        }
    }

    fn parse<T>(&mut self, key: &str, errs: &mut Vec<ConfigError>, f: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        let e = self.get(key)?;
        match f(&e.value) {
            Ok(v) => Some(v),
            Err(m) => {
                errs.push(err(e.line, self.field(key), m));
                None
            }
        }
    }

    fn require<T>(&mut self, key: &str, errs: &mut Vec<ConfigError>, f: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        if !self.has(key) {
            errs.push(err(self.section.line, self.field(key), "missing required key"));
            self.used.insert(key.to_string());
            return None;
        }
        self.parse(key, errs, f)
    }
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("malformed number `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite number `{s}`"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn count(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("malformed non-negative integer `{s}`"))
}

fn at_least_one(s: &str) -> Result<usize, String> {
    match count(s)? {
        0 => Err("must be at least 1".into()),
        n => Ok(n),
    }
}

fn numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split_whitespace().map(number).collect()
}

fn vec3(s: &str) -> Result<Vec3, String> {
    let v = numbers(s)?;
    if v.len() != 3 {
        return Err(format!("expected three components, got {}", v.len()));
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn boolean(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("expected on/off, got `{s}`")),
    }
}

fn spin(s: &str) -> Result<Spin, String> {
    let twice = match s.split_once('/') {
        Some((num, "2")) => num.trim().parse::<u32>().map_err(|_| format!("malformed spin `{s}`"))?,
        Some(_) => return Err(format!("malformed spin `{s}`")),
        None => {
            let v: f64 = s.parse().map_err(|_| format!("malformed spin `{s}`"))?;
            let t = 2.0 * v;
            if t.fract() != 0.0 || t < 1.0 {
                return Err(format!("spin must be a positive multiple of 1/2, got `{s}`"));
            }
            t as u32
        }
    };
    Spin::from_twice(twice).map_err(|e| e.to_string())
}

fn axis(s: &str) -> Result<Axis, String> {
    let label = match s {
        "1" | "x" => 1,
        "2" | "y" => 2,
        "3" | "z" => 3,
        _ => return Err(format!("axis must be 1, 2 or 3, got `{s}`")),
    };
    Axis::from_label(label).map_err(|e| e.to_string())
}

fn check_names(s: &str) -> Result<BTreeSet<CheckName>, String> {
    s.split_whitespace().map(|w| w.parse::<CheckName>()).collect()
}

/// Parses and validates a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    let mut errs = Vec::new();
    let sections = split_document(text, &mut errs);
    let find = |name: &str| sections.iter().find(|s| s.name == name);

    for s in &sections {
        let known = matches!(
            s.name.as_str(),
            "scenario" | "system" | "field" | "run" | "invariant" | "checks" | "output"
        ) || s.name.strip_prefix("interaction.").is_some_and(|l| !l.is_empty());
        if !known {
            errs.push(err(s.line, &s.name, "unknown section"));
        }
    }
    for required in ["system", "field", "run"] {
        if find(required).is_none() {
            errs.push(err(0, required, "missing required section"));
        }
    }

    let (name, description) = match find("scenario") {
        Some(s) => {
            let mut k = Keys::new(s, &["name", "description"], &[], &mut errs);
            let name = k.get("name").map(|e| e.value.clone());
            let description = k.get("description").map(|e| e.value.clone());
            (name, description)
        }
        None => (None, None),
    };
    let name = name.unwrap_or_else(|| "scenario".to_string());
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        errs.push(err(0, "scenario.name", "must be non-empty and use [A-Za-z0-9_-] only"));
    }

    let system = find("system").and_then(|s| parse_system(s, &mut errs));
    let field = find("field").and_then(|s| parse_field(s, &mut errs));

    let mut components = Vec::new();
    let mut interaction_labels = Vec::new();
    for s in sections.iter().filter(|s| s.name.starts_with("interaction.")) {
        interaction_labels.push(s.name["interaction.".len()..].to_string());
        if let Some(c) = parse_interaction(s, system.as_ref(), &mut errs) {
            components.push(c);
        }
    }
    let interaction = InteractionSpec { components };

    let run = find("run").and_then(|s| parse_run(s, field.as_ref(), &mut errs));
    let invariant = parse_invariant(find("invariant"), field.as_ref(), &mut errs);
    let checks = parse_checks(find("checks"), &mut errs);
    let output = parse_output(find("output"), &mut errs);

    if let (Some(sys), Some(run)) = (&system, &run) {
        if sys.dim() > run.dense_cap {
            errs.push(err(
                find("run").map_or(0, |s| s.line),
                "run.dense_cap",
                format!("Hilbert-space dimension {} exceeds the dense cap {}", sys.dim(), run.dense_cap),
            ));
        }
    }
    if checks.enabled.contains(&CheckName::Yan) && !interaction.is_time_independent() {
        errs.push(err(
            find("checks").map_or(0, |s| s.line),
            "checks.yan",
            "the transported-interaction invariant needs a time-independent interaction",
        ));
    }
    if let (Some(f), Some(run)) = (&field, &run) {
        let (lo, hi) = f.domain();
        if run.t_start < lo || run.t_end > hi {
            errs.push(err(0, "run.t_end", format!("run interval exceeds the sampled field range [{lo}, {hi}]")));
        }
    }

    let model = match (system, field) {
        (Some(system), Some(field)) if errs.is_empty() => match ModelSpec::new(system, field, interaction) {
            Ok(m) => Some(m),
            Err(e) => {
                errs.push(err(0, "model", e.to_string()));
                None
            }
        },
        _ => None,
    };

    match (model, run, invariant) {
        (Some(model), Some(run), Some(invariant)) if errs.is_empty() => Ok(ScenarioConfig {
            name,
            description,
            model,
            interaction_labels,
            run,
            invariant,
            checks,
            output,
        }),
        _ => {
            errs.sort_by_key(|e| e.line);
            Err(ConfigErrors(errs))
        }
    }
}

fn parse_system(s: &Section, errs: &mut Vec<ConfigError>) -> Option<SpinSystem> {
    let mut k = Keys::new(s, &["sites", "spin", "spins"], &[], errs);
    let sites = k.parse("sites", errs, at_least_one);
    let spins = k.parse("spins", errs, |v| v.split_whitespace().map(spin).collect::<Result<Vec<_>, _>>());
    let uniform = k.parse("spin", errs, spin);
    let list = match (sites, spins, uniform) {
        (_, Some(_), Some(_)) => {
            errs.push(err(s.line, "system.spin", "give either `spin` or `spins`, not both"));
            return None;
        }
        (Some(n), Some(list), None) if n != list.len() => {
            errs.push(err(
                s.line,
                "system.spins",
                format!("lists {} spins but system.sites = {n}", list.len()),
            ));
            return None;
        }
        (_, Some(list), None) if list.is_empty() => {
            errs.push(err(s.line, "system.spins", "empty spin list"));
            return None;
        }
        (_, Some(list), None) => list,
        (Some(n), None, u) => vec![u.unwrap_or(Spin::HALF); n],
        (None, None, _) => {
            if !k.has("sites") {
                errs.push(err(s.line, "system.sites", "missing required key"));
            }
            return None;
        }
    };
    match SpinSystem::new(list) {
        Ok(sys) => Some(sys),
        Err(e) => {
            errs.push(err(s.line, "system", e.to_string()));
            None
        }
    }
}

fn parse_field(s: &Section, errs: &mut Vec<ConfigError>) -> Option<FieldProfile> {
    let mut k = Keys::new(
        s,
        &[
            "kind",
            "vector",
            "magnitude",
            "cone_angle",
            "cone_angle_deg",
            "angular_frequency",
            "b0",
            "b1",
            "sample",
        ],
        &["sample"],
        errs,
    );
    let kind = k.require("kind", errs, |v| Ok(v.to_string()))?;
    let field = match kind.as_str() {
        "constant" => FieldProfile::Constant(k.require("vector", errs, vec3)?),
        "rotating-cone" => {
            let magnitude = k.parse("magnitude", errs, positive).unwrap_or(1.0);
            let angle = match (k.has("cone_angle"), k.has("cone_angle_deg")) {
                (true, true) => {
                    errs.push(err(s.line, "field.cone_angle", "give either cone_angle or cone_angle_deg"));
                    k.get("cone_angle_deg");
                    None
                }
                (true, false) => k.parse("cone_angle", errs, number),
                (false, true) => k.parse("cone_angle_deg", errs, number).map(|d| d * PI / 180.0),
                (false, false) => {
                    errs.push(err(s.line, "field.cone_angle", "missing required key"));
                    None
                }
            };
            let omega = k.require("angular_frequency", errs, number);
            FieldProfile::RotatingCone {
                magnitude,
                cone_angle: angle?,
                angular_frequency: omega?,
            }
        }
        "linear-sweep" => {
            let b0 = k.require("b0", errs, vec3);
            let b1 = k.require("b1", errs, vec3);
            FieldProfile::LinearSweep { b0: b0?, b1: b1? }
        }
        "piecewise-samples" => {
            let mut samples = Vec::new();
            for e in k.all("sample") {
                match numbers(&e.value) {
                    Ok(v) if v.len() == 4 => samples.push((v[0], Vec3::new(v[1], v[2], v[3]))),
                    Ok(v) => errs.push(err(e.line, "field.sample", format!("expected `t x y z`, got {} numbers", v.len()))),
                    Err(m) => errs.push(err(e.line, "field.sample", m)),
                }
            }
            FieldProfile::Samples(samples)
        }
        other => {
            errs.push(err(
                k.get("kind").map_or(s.line, |e| e.line),
                "field.kind",
                format!("unknown kind `{other}` (constant, rotating-cone, linear-sweep, piecewise-samples)"),
            ));
            return None;
        }
    };
    k.reject_unused(&format!("kind = {kind}"), errs);
    match field.validate() {
        Ok(()) => Some(field),
        Err(e) => {
            errs.push(err(s.line, "field", e.to_string()));
            None
        }
    }
}

fn parse_schedule(k: &mut Keys<'_>, s: &Section, errs: &mut Vec<ConfigError>) -> Option<Schedule> {
    let kind = k.parse("schedule", errs, |v| Ok(v.to_string())).unwrap_or_else(|| "constant".into());
    let sched = match kind.as_str() {
        "constant" => Schedule::Constant(k.parse("lambda", errs, number).unwrap_or(1.0)),
        "polynomial" => Schedule::Polynomial(k.require("coefficients", errs, numbers)?),
        "sinusoid" => Schedule::Sinusoid {
            amplitude: k.require("amplitude", errs, number)?,
            angular_frequency: k.require("angular_frequency", errs, number)?,
            phase: k.parse("phase", errs, number).unwrap_or(0.0),
            offset: k.parse("offset", errs, number).unwrap_or(0.0),
        },
        "sampled" => {
            let mut samples = Vec::new();
            for e in k.all("sample") {
                match numbers(&e.value) {
                    Ok(v) if v.len() == 2 => samples.push((v[0], v[1])),
                    Ok(v) => errs.push(err(e.line, k.field("sample"), format!("expected `t value`, got {} numbers", v.len()))),
                    Err(m) => errs.push(err(e.line, k.field("sample"), m)),
                }
            }
            if samples.len() < 2 || samples.windows(2).any(|w| w[1].0 <= w[0].0) {
                errs.push(err(s.line, k.field("sample"), "need at least two samples with increasing times"));
                return None;
            }
            Schedule::Sampled(samples)
        }
        other => {
            errs.push(err(
                s.line,
                k.field("schedule"),
                format!("unknown schedule `{other}` (constant, polynomial, sinusoid, sampled)"),
            ));
            return None;
        }
    };
    Some(sched)
}

fn parse_interaction(s: &Section, sys: Option<&SpinSystem>, errs: &mut Vec<ConfigError>) -> Option<InteractionComponent> {
    let mut k = Keys::new(
        s,
        &[
            "order",
            "schedule",
            "lambda",
            "coefficients",
            "amplitude",
            "angular_frequency",
            "phase",
            "offset",
            "sample",
            "heisenberg",
        ],
        &["sample"],
        errs,
    );
    let n_sites = sys.map(|s| s.n_sites());
    let order = k.parse("order", errs, at_least_one).unwrap_or(2);
    let schedule = parse_schedule(&mut k, s, errs);
    let mut tensor = match CouplingTensor::new(order) {
        Ok(t) => t,
        Err(e) => {
            errs.push(err(s.line, k.field("order"), e.to_string()));
            return None;
        }
    };
    let before = errs.len();

    if let Some(e) = k.get("heisenberg") {
        if order != 2 {
            errs.push(err(e.line, k.field("heisenberg"), "needs order = 2"));
        } else {
            let pairs = match (e.value.as_str(), n_sites) {
                ("chain", Some(n)) => Ok((1..n).map(|i| (i - 1, i)).collect()),
                ("ring", Some(n)) if n > 2 => Ok((0..n).map(|i| (i, (i + 1) % n)).collect()),
                ("ring", Some(_)) => Err("a ring needs at least three sites".to_string()),
                ("chain" | "ring", None) => Err("needs a valid [system]".to_string()),
                (list, _) => parse_pairs(list, n_sites),
            };
            match pairs.and_then(|p| heisenberg_tensor(&p).map_err(|e| e.to_string())) {
                Ok(q) => match tensor.plus(&q) {
                    Ok(t) => tensor = t,
                    Err(m) => errs.push(err(e.line, k.field("heisenberg"), m.to_string())),
                },
                Err(m) => errs.push(err(e.line, k.field("heisenberg"), m)),
            }
        }
    }

    for (line, row) in &s.rows {
        let tokens: Vec<&str> = row.split_whitespace().collect();
        if tokens.len() != 2 * order + 1 {
            errs.push(err(
                *line,
                &s.name,
                format!(
                    "tensor entry needs {order} sites, {order} axes and a value ({} fields), got {}",
                    2 * order + 1,
                    tokens.len()
                ),
            ));
            continue;
        }
        let mut sites = Vec::with_capacity(order);
        let mut ok = true;
        for t in &tokens[..order] {
            match count(t) {
                Ok(i) if n_sites.is_some_and(|n| i >= n) => {
                    errs.push(err(*line, &s.name, format!("site index {i} out of range (system has {} sites)", n_sites.unwrap_or(0))));
                    ok = false;
                }
                Ok(i) => sites.push(i),
                Err(m) => {
                    errs.push(err(*line, &s.name, m));
                    ok = false;
                }
            }
        }
        let mut axes = Vec::with_capacity(order);
        for t in &tokens[order..2 * order] {
            match axis(t) {
                Ok(a) => axes.push(a),
                Err(m) => {
                    errs.push(err(*line, &s.name, m));
                    ok = false;
                }
            }
        }
        let value = match number(tokens[2 * order]) {
            Ok(v) => v,
            Err(m) => {
                errs.push(err(*line, &s.name, m));
                continue;
            }
        };
        if ok {
            if let Err(e) = tensor.accumulate(sites, axes, value) {
                errs.push(err(*line, &s.name, e.to_string()));
            }
        }
    }
    if tensor.is_empty() && errs.len() == before {
        errs.push(err(s.line, &s.name, "interaction block has no tensor entries"));
    }
    k.reject_unused(&format!("{} with this schedule", s.name), errs);
    if errs.len() != before {
        return None;
    }
    Some(InteractionComponent {
        tensor,
        schedule: schedule?,
    })
}

fn parse_pairs(list: &str, n_sites: Option<usize>) -> Result<Vec<(usize, usize)>, String> {
    let mut pairs = Vec::new();
    for w in list.split_whitespace() {
        let (a, b) = w.split_once('-').ok_or_else(|| format!("expected `i-j`, got `{w}`"))?;
        let (i, j) = (count(a)?, count(b)?);
        if let Some(n) = n_sites {
            if i >= n || j >= n {
                return Err(format!("pair {w} out of range (system has {n} sites)"));
            }
        }
        if i == j {
            return Err(format!("pair {w} couples a site to itself"));
        }
        pairs.push((i, j));
    }
    if pairs.is_empty() {
        return Err("empty pair list".into());
    }
    Ok(pairs)
}

fn parse_run(s: &Section, field: Option<&FieldProfile>, errs: &mut Vec<ConfigError>) -> Option<RunSpec> {
    let mut k = Keys::new(
        s,
        &[
            "t_start",
            "t_end",
            "periods",
            "steps",
            "substeps",
            "transport_substeps",
            "phase_substeps",
            "r_substeps",
            "dense_cap",
            "seed",
        ],
        &[],
        errs,
    );
    let t_start = k.parse("t_start", errs, number).unwrap_or(0.0);
    let t_end = match (k.has("t_end"), k.has("periods")) {
        (true, true) => {
            errs.push(err(s.line, "run.t_end", "give either t_end or periods"));
            None
        }
        (true, false) => k.parse("t_end", errs, number),
        (false, true) => {
            let periods = k.parse("periods", errs, positive)?;
            match field.and_then(|f| f.period()) {
                Some(p) => Some(t_start + periods * p),
                None => {
                    let line = k.get("periods").map_or(s.line, |e| e.line);
                    errs.push(err(line, "run.periods", "the field has no period"));
                    None
                }
            }
        }
        (false, false) => {
            errs.push(err(s.line, "run.t_end", "missing required key (t_end or periods)"));
            None
        }
    };
    let steps = k.require("steps", errs, |v| match count(v)? {
        n if n < 2 => Err(format!("must be at least 2, got {n}")),
        n => Ok(n),
    });
    let substeps = k.parse("substeps", errs, at_least_one).unwrap_or(1);
    let transport_substeps = k.parse("transport_substeps", errs, at_least_one).unwrap_or(128);
    let phase_substeps = k.parse("phase_substeps", errs, at_least_one).unwrap_or(16);
    let r_substeps = k.parse("r_substeps", errs, at_least_one).unwrap_or(4);
    let dense_cap = k.parse("dense_cap", errs, at_least_one).unwrap_or(DENSE_CAP);
    let seed = k.parse("seed", errs, |v| v.parse::<u64>().map_err(|_| format!("malformed seed `{v}`"))).unwrap_or(0);
    let t_end = t_end?;
    if t_end <= t_start {
        let line = k.get("t_end").map_or(s.line, |e| e.line);
        errs.push(err(line, "run.t_end", format!("must exceed t_start = {t_start}")));
        return None;
    }
    Some(RunSpec {
        t_start,
        t_end,
        steps: steps?,
        substeps,
        transport_substeps,
        phase_substeps,
        r_substeps,
        dense_cap,
        seed,
    })
}

fn parse_invariant(s: Option<&Section>, field: Option<&FieldProfile>, errs: &mut Vec<ConfigError>) -> Option<InvariantSpec> {
    let mut spec = InvariantSpec {
        r0: R0Choice::Cyclic,
        fd_divisor: 16,
        yan_fd_divisor: 256,
    };
    let Some(s) = s else {
        return Some(spec);
    };
    let mut k = Keys::new(s, &["r0", "fd_divisor", "yan_fd_divisor"], &[], errs);
    let before = errs.len();
    if let Some(r0) = k.parse("r0", errs, |v| match v {
        "cyclic" => Ok(R0Choice::Cyclic),
        "field" => Ok(R0Choice::FieldAligned),
        other => {
            let r = vec3(other).map_err(|_| format!("expected `cyclic`, `field` or three numbers, got `{other}`"))?;
            if r.norm() == 0.0 {
                Err("R(0) must be nonzero".into())
            } else {
                Ok(R0Choice::Explicit(r))
            }
        }
    }) {
        if r0 == R0Choice::Cyclic && field.is_some_and(|f| f.cyclic_r0(0.0).is_none()) {
            let line = k.get("r0").map_or(s.line, |e| e.line);
            errs.push(err(line, "invariant.r0", "the field has no co-rotating solution; use `field` or an explicit vector"));
        }
        spec.r0 = r0;
    }
    if let Some(d) = k.parse("fd_divisor", errs, at_least_one) {
        spec.fd_divisor = d;
    }
    if let Some(d) = k.parse("yan_fd_divisor", errs, at_least_one) {
        spec.yan_fd_divisor = d;
    }
    (errs.len() == before).then_some(spec)
}

fn parse_checks(s: Option<&Section>, errs: &mut Vec<ConfigError>) -> ChecksSpec {
    let mut spec = ChecksSpec {
        enabled: CheckName::ALL.into_iter().collect(),
        expect_fail: BTreeSet::new(),
        cross_validate_trials: 50,
    };
    let Some(s) = s else {
        return spec;
    };
    let mut allowed: Vec<&str> = CheckName::ALL.iter().map(|c| c.key()).collect();
    allowed.extend(["expect_fail", "cross_validate_trials"]);
    let mut k = Keys::new(s, &allowed, &[], errs);
    for c in CheckName::ALL {
        if let Some(on) = k.parse(c.key(), errs, boolean) {
            if !on {
                spec.enabled.remove(&c);
            }
        }
    }
    if let Some(set) = k.parse("expect_fail", errs, check_names) {
        spec.expect_fail = set;
    }
    if let Some(n) = k.parse("cross_validate_trials", errs, count) {
        spec.cross_validate_trials = n;
    }
    spec
}

fn parse_output(s: Option<&Section>, errs: &mut Vec<ConfigError>) -> OutputSpec {
    let mut spec = OutputSpec {
        directory: None,
        formats: [Format::Csv].into_iter().collect(),
    };
    let Some(s) = s else {
        return spec;
    };
    let mut k = Keys::new(s, &["directory", "formats"], &[], errs);
    spec.directory = k.get("directory").map(|e| PathBuf::from(&e.value));
    if let Some(f) = k.parse("formats", errs, |v| {
        let set = v.split_whitespace().map(|w| w.parse::<Format>()).collect::<Result<BTreeSet<_>, _>>()?;
        if set.is_empty() {
            Err("at least one format".to_string())
        } else {
            Ok(set)
        }
    }) {
        spec.formats = f;
    }
    spec
}

/// Flattened view for reports: `section.key -> value` after defaults.
pub fn describe(cfg: &ScenarioConfig) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("scenario.name".into(), cfg.name.clone());
    m.insert("system.sites".into(), cfg.model.system.n_sites().to_string());
    m.insert(
        "system.spins".into(),
        cfg.model.system.spins().iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "),
    );
    m.insert("system.dim".into(), cfg.model.system.dim().to_string());
    m.insert("run.t_start".into(), format!("{:.16e}", cfg.run.t_start));
    m.insert("run.t_end".into(), format!("{:.16e}", cfg.run.t_end));
    m.insert("run.steps".into(), cfg.run.steps.to_string());
    m.insert("run.substeps".into(), cfg.run.substeps.to_string());
    m.insert("run.transport_substeps".into(), cfg.run.transport_substeps.to_string());
    m.insert("run.phase_substeps".into(), cfg.run.phase_substeps.to_string());
    m.insert("run.r_substeps".into(), cfg.run.r_substeps.to_string());
    m.insert("run.seed".into(), cfg.run.seed.to_string());
    m.insert("invariant.fd_divisor".into(), cfg.invariant.fd_divisor.to_string());
    m.insert("invariant.yan_fd_divisor".into(), cfg.invariant.yan_fd_divisor.to_string());
    m.insert(
        "invariant.r0".into(),
        match cfg.invariant.r0 {
            R0Choice::Cyclic => "cyclic".into(),
            R0Choice::FieldAligned => "field".into(),
            R0Choice::Explicit(r) => format!("{:.16e} {:.16e} {:.16e}", r[0], r[1], r[2]),
        },
    );
    m.insert("interaction.blocks".into(), cfg.interaction_labels.join(" "));
    m
}
