//! Instance and solution documents, legacy benchmark files, the instance
//! generator and CSV reports.

pub mod generate;
pub mod legacy;
pub mod native;
pub mod report;
pub mod solution;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid document: {0}")]
    Schema(String),
    #[error("{path}: {inner}")]
    InFile { path: PathBuf, inner: Box<IoError> },
    #[error("unknown size class '{0}'")]
    UnknownSize(String),
}

impl IoError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }

    pub fn in_file(self, path: &Path) -> Self {
        IoError::InFile { path: path.to_path_buf(), inner: Box::new(self) }
    }

    /// True for malformed or inconsistent input, as opposed to I/O failures.
    pub fn is_parse(&self) -> bool {
        match self {
            IoError::Parse(_) | IoError::Schema(_) | IoError::UnknownSize(_) => true,
            IoError::InFile { inner, .. } => inner.is_parse(),
            IoError::Io { .. } => false,
        }
    }
}

/// Reads an instance, picking the legacy reader for files that are not TOML
/// documents.
pub fn read_instance(path: &Path) -> Result<crate::Instance, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    if legacy::looks_legacy(&text) {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("legacy");
        legacy::parse_legacy_str(stem, &text).map_err(|e| e.in_file(path))
    } else {
        native::parse_native_str(&text).map_err(|e| e.in_file(path))
    }
}
