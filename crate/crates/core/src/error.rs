use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors returned by tree and schema operations.
///
/// The same type travels over the remote protocol, so every variant carries
/// only owned, serializable data.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum FsError {
    #[error("no such node: {0}")]
    NotFound(String),
    #[error("not a directory: {0}")]
    NotADirectory(String),
    #[error("is a directory: {0}")]
    IsADirectory(String),
    #[error("already exists: {0}")]
    AlreadyExists(String),
    #[error("invalid name: {0}")]
    InvalidName(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("permission denied: {0}")]
    PermissionDenied(String),
    #[error("directory not empty: {0}")]
    DirectoryNotEmpty(String),
    #[error("not a symbolic link: {0}")]
    NotALink(String),
    #[error("dangling symbolic link: {0}")]
    DanglingLink(String),
    #[error("too many levels of symbolic links: {0}")]
    LoopDetected(String),
    #[error("malformed snapshot at line {line}: {reason}")]
    MalformedSnapshot { line: usize, reason: String },
    #[error("not a schema point: {0}")]
    NotASchemaPoint(String),
    #[error("unknown field: {0}")]
    UnknownField(String),
    #[error("cannot parse {field}: {reason}")]
    ParseError { field: String, reason: String },
    #[error("{field} out of range: {reason}")]
    RangeError { field: String, reason: String },
    #[error("validation failed for {path}: {reason}")]
    ValidationFailed { path: String, reason: String },
    #[error("store unreachable: {0}")]
    Unreachable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl FsError {
    /// Short, stable tag for the error kind (used by CLIs and the mount bridge).
    pub fn kind(&self) -> &'static str {
        match self {
            FsError::NotFound(_) => "not_found",
            FsError::NotADirectory(_) => "not_a_directory",
            FsError::IsADirectory(_) => "is_a_directory",
            FsError::AlreadyExists(_) => "already_exists",
            FsError::InvalidName(_) => "invalid_name",
            FsError::InvalidArgument(_) => "invalid_argument",
            FsError::PermissionDenied(_) => "permission_denied",
            FsError::DirectoryNotEmpty(_) => "directory_not_empty",
            FsError::NotALink(_) => "not_a_link",
            FsError::DanglingLink(_) => "dangling_link",
            FsError::LoopDetected(_) => "loop_detected",
            FsError::MalformedSnapshot { .. } => "malformed_snapshot",
            FsError::NotASchemaPoint(_) => "not_a_schema_point",
            FsError::UnknownField(_) => "unknown_field",
            FsError::ParseError { .. } => "parse_error",
            FsError::RangeError { .. } => "range_error",
            FsError::ValidationFailed { .. } => "validation_failed",
            FsError::Unreachable(_) => "unreachable",
            FsError::Protocol(_) => "protocol",
        }
    }

    /// True for the field-grammar and commit validation family.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            FsError::UnknownField(_) | FsError::ParseError { .. } | FsError::RangeError { .. } | FsError::ValidationFailed { .. }
        )
    }

    pub(crate) fn parse(field: impl Into<String>, reason: impl Into<String>) -> Self {
        FsError::ParseError {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn range(field: impl Into<String>, reason: impl Into<String>) -> Self {
        FsError::RangeError {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type FsResult<T> = Result<T, FsError>;
