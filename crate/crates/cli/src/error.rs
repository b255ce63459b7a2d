use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{0}")]
    Io(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: ymhd::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Format(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Format(e.to_string())
    }
}

/// Attach a pipeline stage to a library error.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for ymhd::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

/// Machine-readable error report.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub stage: Option<&'static str>,
    pub message: String,
    pub violations: Vec<String>,
}

impl CliError {
    pub fn report(&self) -> ErrorReport {
        match self {
            CliError::Config(v) => ErrorReport {
                kind: "config",
                stage: Some("config"),
                message: "invalid configuration".into(),
                violations: v.clone(),
            },
            CliError::Io(m) => ErrorReport { kind: "io", stage: None, message: m.clone(), violations: vec![] },
            CliError::Stage { stage, source } => {
                let kind = match source {
                    ymhd::Error::BlowUp { .. } => "blow_up",
                    ymhd::Error::Solver(_) => "solver",
                    ymhd::Error::Config(_) => "config",
                    ymhd::Error::Io(_) => "io",
                    _ => "numerics",
                };
                ErrorReport { kind, stage: Some(stage), message: source.to_string(), violations: vec![] }
            }
            CliError::Format(m) => ErrorReport { kind: "format", stage: None, message: m.clone(), violations: vec![] },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({ "error": self.report() })).expect("error report serializes")
    }
}
