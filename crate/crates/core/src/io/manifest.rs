use super::IoError;
use crate::eval::{EvalError, Manifest, ManifestEntry};
use crate::types::PeriocularRecord;

/// One JSON object per line; blank lines are not allowed.
pub fn parse_manifest(text: &str) -> Result<Manifest, IoError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let entry: ManifestEntry = serde_json::from_str(raw).map_err(|e| IoError::parse(line, e.to_string()))?;
        PeriocularRecord::new(Vec::new(), entry.eye_area, entry.brow_area).map_err(|e| IoError::parse(line, e.to_string()))?;
        if entry.subject_id.is_empty() {
            return Err(IoError::parse(line, "empty subject_id"));
        }
        entries.push(entry);
    }
    Manifest::new(entries).map_err(|e| match e {
        EvalError::DuplicateEntry { index, .. } => IoError::parse(index as u64 + 1, e.to_string()),
        other => IoError::parse(0, other.to_string()),
    })
}

pub fn format_manifest(manifest: &Manifest) -> String {
    let mut out = String::new();
    for e in manifest.entries() {
        out.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
        out.push('\n');
    }
    out
}
