use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numeric(_) => 3,
            HarnessError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Numeric(_) => "numeric",
            HarnessError::Io { .. } => "io",
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Report { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() })
            .expect("error report serializes")
    }
}

impl From<vqa_core::Error> for HarnessError {
    fn from(e: vqa_core::Error) -> Self {
        match e {
            vqa_core::Error::Numeric(_) | vqa_core::Error::NoConvergence { .. } => HarnessError::Numeric(e.to_string()),
            other => HarnessError::Config(other.to_string()),
        }
    }
}
