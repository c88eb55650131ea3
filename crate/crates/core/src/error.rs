use thiserror::Error;

use crate::domain::ValidationReport;

/// Failures talking to the language model provider.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("provider unreachable: {0}")]
    Unreachable(String),
    #[error("provider rejected credentials: {0}")]
    Auth(String),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("provider response malformed: {0}")]
    Protocol(String),
    #[error("no transcript entry for agent `{agent}` (fingerprint {fingerprint})")]
    TranscriptMiss { agent: String, fingerprint: String },
    #[error("scripted responses exhausted for agent `{0}`")]
    ScriptExhausted(String),
    #[error("network access is disabled in this mode")]
    NetworkForbidden,
}

/// Crate-wide error type. Every variant maps onto one stable error code.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("validation failed: {message}")]
    Validation {
        message: String,
        report: Option<ValidationReport>,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("agent `{agent}` produced invalid output after {attempts} attempt(s): {message}")]
    Schema {
        agent: String,
        attempts: u32,
        message: String,
        last_raw: String,
    },
    #[error("rewrite touched units outside the intent's scope: {unit_ids:?}")]
    Scope { unit_ids: Vec<String> },
    #[error("segmentation failed: {0}")]
    Segmentation(String),
    #[error("edit does not change the text")]
    NoOpEdit,
    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },
    #[error("`{operation}` is not allowed in state {state}")]
    State {
        operation: &'static str,
        state: String,
    },
    #[error("storage error: {0}")]
    Storage(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            message: message.into(),
            report: None,
        }
    }

    pub fn invalid_report(message: impl Into<String>, report: ValidationReport) -> Self {
        Error::Validation {
            message: message.into(),
            report: Some(report),
        }
    }

    pub fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        Error::NotFound {
            kind,
            id: id.into(),
        }
    }

    /// Stable machine-readable code used by the HTTP API and the CLI exit codes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation { .. } => "validation_error",
            Error::Gateway(_) => "gateway_error",
            Error::Schema { .. } => "schema_error",
            Error::Scope { .. } => "scope_error",
            Error::Segmentation(_) => "segmentation_error",
            Error::NoOpEdit => "noop_edit",
            Error::NotFound { .. } => "not_found",
            Error::State { .. } => "state_error",
            Error::Storage(_) => "storage_error",
            Error::Config(_) => "config_error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Storage(err.to_string())
    }
}
