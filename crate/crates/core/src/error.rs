use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("negative delay {0}us")]
    NegativeDelay(i64),
    #[error("event scheduled at {at}us is before the clock ({now}us)")]
    InPast { at: u64, now: u64 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("no link between {0} and {1}")]
    UnknownLink(String, String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("invalid link class {name}: {reason}")]
    InvalidLink { name: String, reason: String },
}

/// One validation finding, tied to the config path that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown parameter path {0}")]
    UnknownPath(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("reports come from different seeds ({0} vs {1})")]
    SeedMismatch(u64, u64),
    #[error("reports come from different workloads ({0} vs {1})")]
    WorkloadMismatch(String, String),
    #[error("baseline metric {0} is zero; relative delta undefined")]
    ZeroBaseline(&'static str),
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("report is missing key {0}")]
    MissingKey(String),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}
