use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(ConfigIssue),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Simulation(#[from] qlink::Error),
}

/// A config problem, located by dotted key and 1-based line when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if !self.key.is_empty() {
            write!(f, " at `{}`", self.key)?;
        }
        if let Some(line) = self.line {
            write!(f, " (line {line})")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl CliError {
    pub fn config(key: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        CliError::Config(ConfigIssue { key: key.into(), line, message: message.into() })
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Simulation(_) => "simulation",
        }
    }

    /// Process exit status: 2 for bad input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Simulation(_) => 1,
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut record = serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } });
        if let CliError::Config(issue) = self {
            record["error"]["key"] = issue.key.clone().into();
            record["error"]["line"] = issue.line.into();
        }
        record
    }
}
