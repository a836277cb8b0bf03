//! Shared-task submission files: headerless UTF-8 text, one `id<TAB>label`
//! line per test post, labels spelled `HOF` / `NOT`.

use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use crate::corpus::Label;

#[derive(Debug, Error)]
pub enum SubmissionError {
    #[error("submission io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `id<TAB>label`, got {content:?}")]
    Malformed { line: usize, content: String },
    #[error("line {line}: invalid label {label:?}")]
    InvalidLabel { line: usize, label: String },
    #[error("duplicate prediction for id {0:?}")]
    DuplicateId(String),
    #[error("predictions missing for {missing} of {expected} ids (first: {first:?})")]
    IncompletePredictions {
        missing: usize,
        expected: usize,
        first: String,
    },
    #[error("prediction for unknown id {0:?}")]
    UnknownId(String),
}

/// One scored prediction; `score` is the model's probability of `HOF`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub id: String,
    pub label: Label,
    pub score: f64,
}

fn check_coverage(
    records: &[PredictionRecord],
    expected_ids: &[String],
) -> Result<(), SubmissionError> {
    let mut seen = HashSet::new();
    for record in records {
        if !seen.insert(record.id.as_str()) {
            return Err(SubmissionError::DuplicateId(record.id.clone()));
        }
    }
    let expected: HashSet<&str> = expected_ids.iter().map(String::as_str).collect();
    for record in records {
        if !expected.contains(record.id.as_str()) {
            return Err(SubmissionError::UnknownId(record.id.clone()));
        }
    }
    let missing: Vec<&str> = expected_ids
        .iter()
        .map(String::as_str)
        .filter(|id| !seen.contains(id))
        .collect();
    if !missing.is_empty() {
        return Err(SubmissionError::IncompletePredictions {
            missing: missing.len(),
            expected: expected_ids.len(),
            first: missing[0].to_string(),
        });
    }
    Ok(())
}

/// Render records to the submission format. `expected_ids` fixes the row
/// order and makes partial submissions an error rather than a silent gap.
pub fn render_submission(
    records: &[PredictionRecord],
    expected_ids: &[String],
) -> Result<String, SubmissionError> {
    check_coverage(records, expected_ids)?;
    let by_id: std::collections::HashMap<&str, &PredictionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut out = String::new();
    for id in expected_ids {
        let record = by_id[id.as_str()];
        out.push_str(id);
        out.push('\t');
        out.push_str(record.label.as_str());
        out.push('\n');
    }
    Ok(out)
}

/// Write a submission file, creating parent directories as needed.
pub fn export_submission(
    records: &[PredictionRecord],
    expected_ids: &[String],
    path: &Path,
) -> Result<(), SubmissionError> {
    let text = render_submission(records, expected_ids)?;
    let io_err = |source| SubmissionError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    std::fs::write(path, text).map_err(io_err)
}

/// Parse a submission file back into `(id, label)` pairs, preserving order.
pub fn parse_submission(path: &Path) -> Result<Vec<(String, Label)>, SubmissionError> {
    let text = std::fs::read_to_string(path).map_err(|source| SubmissionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, label_text) = line.split_once('\t').ok_or(SubmissionError::Malformed {
            line: idx + 1,
            content: line.to_string(),
        })?;
        let label = Label::parse(label_text).ok_or_else(|| SubmissionError::InvalidLabel {
            line: idx + 1,
            label: label_text.to_string(),
        })?;
        if !seen.insert(id.to_string()) {
            return Err(SubmissionError::DuplicateId(id.to_string()));
        }
        rows.push((id.to_string(), label));
    }
    Ok(rows)
}
