//! Exit codes and the one-line JSON status printed at the end of every run.

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use snn_core::SnnError;

use crate::config::ConfigError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureKind {
    Config,
    Data,
    Numeric,
    Io,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Data => 3,
            FailureKind::Numeric => 4,
            FailureKind::Io => 1,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            kind: FailureKind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            kind: FailureKind::Data,
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, e: impl fmt::Display) -> Self {
        Failure {
            kind: FailureKind::Io,
            message: format!("{}: {e}", path.as_ref().display()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for Failure {}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<SnnError> for Failure {
    fn from(e: SnnError) -> Self {
        let kind = match e {
            SnnError::Numeric(_) => FailureKind::Numeric,
            SnnError::Domain(_) => FailureKind::Config,
            _ => FailureKind::Data,
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

/// Final machine-readable line of a run.
#[derive(Debug, Serialize)]
pub struct Status {
    pub status: &'static str,
    pub code: i32,
    pub verb: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<FailureKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Status {
    pub fn ok(verb: &str, run_dir: PathBuf) -> Self {
        Status {
            status: "ok",
            code: 0,
            verb: verb.into(),
            run_dir: Some(run_dir),
            kind: None,
            message: None,
        }
    }

    pub fn failed(verb: &str, f: &Failure) -> Self {
        Status {
            status: "error",
            code: f.exit_code(),
            verb: verb.into(),
            run_dir: None,
            kind: Some(f.kind),
            message: Some(f.message.replace('\n', " ")),
        }
    }

    pub fn line(&self) -> String {
        serde_json::to_string(self).expect("status serializes")
    }
}
