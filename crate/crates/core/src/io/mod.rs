//! On-disk formats. Every parser works on an in-memory buffer and is strict:
//! malformed input is an error carrying a byte offset or line number, never a
//! silently coerced value.

mod checkpoint;
mod features;
mod manifest;
mod scores;
mod template;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::types::TypeError;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, Checkpoint, LayerRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use features::{format_features, parse_features, FeatureTable};
pub use manifest::{format_manifest, parse_manifest};
pub use scores::{format_roc, format_scores, parse_roc, parse_scores, PairStatus, ScoreRow, ROC_COLUMNS, SCORE_COLUMNS};
pub use template::{decode_template, encode_template, template_file_len, TEMPLATE_HEADER_LEN, TEMPLATE_MAGIC, TEMPLATE_VERSION};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error("template header truncated: expected at least {TEMPLATE_HEADER_LEN} bytes, found {actual}")]
    HeaderTruncated { actual: usize },
    #[error("bad template magic {found:?} at offset 0")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported template version {0} at offset 4")]
    UnsupportedVersion(u8),
    #[error("template length mismatch: expected {expected} bytes for {height}x{width}, found {actual}")]
    Length { expected: usize, actual: usize, height: usize, width: usize },
    #[error("non-zero padding bits in byte at offset {offset}")]
    Padding { offset: usize },
    #[error("invalid template: {0}")]
    Template(#[from] TypeError),
    #[error("line {line}: {detail}")]
    Parse { line: u64, detail: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl IoError {
    pub(crate) fn parse(line: u64, detail: impl Into<String>) -> Self {
        IoError::Parse { line, detail: detail.into() }
    }

    /// Prefixes a parse error with the file it came from.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            IoError::Parse { line, detail } => IoError::Parse { line, detail: format!("{}: {detail}", path.display()) },
            other => other,
        }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::File { path: path.to_owned(), source })
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_owned(), source })
}

/// Writes `data`, creating parent directories as needed.
pub fn write_bytes(path: &Path, data: &[u8]) -> Result<(), IoError> {
    let err = |source| IoError::File { path: path.to_owned(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(err)?;
    }
    fs::write(path, data).map_err(err)
}

/// Parses a finite `f64` with no surrounding whitespace.
pub(crate) fn parse_finite(field: &str, line: u64, column: &str) -> Result<f64, IoError> {
    let v: f64 = field.parse().map_err(|_| IoError::parse(line, format!("column {column}: {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(IoError::parse(line, format!("column {column}: {field:?} is not finite")));
    }
    Ok(v)
}
