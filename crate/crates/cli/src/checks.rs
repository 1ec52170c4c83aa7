use std::fmt;
use std::str::FromStr;

use serde::Serialize;

/// Verifications a scenario can toggle, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    Symmetry,
    Invariant,
    Factorization,
    Frames,
    Yan,
    Phases,
    PhaseCoincidence,
}

impl CheckName {
    pub const ALL: [CheckName; 7] = [
        CheckName::Symmetry,
        CheckName::Invariant,
        CheckName::Factorization,
        CheckName::Frames,
        CheckName::Yan,
        CheckName::Phases,
        CheckName::PhaseCoincidence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Symmetry => "symmetry",
            CheckName::Invariant => "invariant",
            CheckName::Factorization => "factorization",
            CheckName::Frames => "frames",
            CheckName::Yan => "yan",
            CheckName::Phases => "phases",
            CheckName::PhaseCoincidence => "phase-coincidence",
        }
    }

    /// Toggle key in the `[checks]` section.
    pub fn key(self) -> &'static str {
        match self {
            CheckName::PhaseCoincidence => "phase_coincidence",
            other => other.as_str(),
        }
    }

    /// Checks whose verdict is only meaningful when this one did not fail.
    pub fn depends_on(self) -> &'static [CheckName] {
        match self {
            CheckName::Invariant | CheckName::Factorization => &[CheckName::Symmetry],
            CheckName::PhaseCoincidence => &[CheckName::Symmetry, CheckName::Phases],
            _ => &[],
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s || c.key() == s)
            .ok_or_else(|| {
                let names: Vec<_> = CheckName::ALL.iter().map(|c| c.as_str()).collect();
                format!("unknown check `{s}` (one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Failed as declared.
    ExpectedFail,
    /// Declared to fail but passed.
    UnexpectedPass,
    Skipped,
    Error,
}

impl Status {
    pub fn resolve(passed: bool, expected_fail: bool) -> Status {
        match (passed, expected_fail) {
            (true, false) => Status::Pass,
            (true, true) => Status::UnexpectedPass,
            (false, false) => Status::Fail,
            (false, true) => Status::ExpectedFail,
        }
    }

    /// Whether the outcome matches the scenario's declaration.
    pub fn as_expected(self) -> bool {
        matches!(self, Status::Pass | Status::ExpectedFail | Status::Skipped)
    }

    /// Whether dependants may still run.
    pub fn usable(self) -> bool {
        matches!(self, Status::Pass | Status::ExpectedFail | Status::UnexpectedPass)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::ExpectedFail => "expected-fail",
            Status::UnexpectedPass => "unexpected-pass",
            Status::Skipped => "skipped",
            Status::Error => "error",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (csv, json)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in CheckName::ALL {
            assert_eq!(c.as_str().parse::<CheckName>().unwrap(), c);
            assert_eq!(c.key().parse::<CheckName>().unwrap(), c);
        }
        assert!("bogus".parse::<CheckName>().is_err());
    }

    #[test]
    fn status_resolution() {
        assert_eq!(Status::resolve(true, false), Status::Pass);
        assert_eq!(Status::resolve(false, true), Status::ExpectedFail);
        assert!(!Status::resolve(true, true).as_expected());
        assert!(!Status::resolve(false, false).as_expected());
        assert!(Status::ExpectedFail.usable());
        assert!(!Status::Fail.usable());
    }
}
