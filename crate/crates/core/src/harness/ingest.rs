use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::payload::{PayloadLabel, RawPayload};

/// Corpus shipped with the crate: `payload,label` rows.
pub const BUNDLED_CORPUS: &str = include_str!("../../data/corpus.csv");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("cannot read dataset: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
}

impl FormatError {
    fn at(line: u64, message: impl Into<String>) -> Self {
        FormatError::Line { line, message: message.into() }
    }
}

pub fn ingest(path: &Path) -> Result<Vec<RawPayload>, FormatError> {
    let source = fs::read_to_string(path).map_err(|e| FormatError::Io(format!("{}: {e}", path.display())))?;
    ingest_str(&source)
}

/// Parse `payload,label` CSV. Identical payloads (same text and label)
/// collapse into one entry whose multiplicity counts the rows; ids follow
/// first appearance.
pub fn ingest_str(source: &str) -> Result<Vec<RawPayload>, FormatError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(source.as_bytes());
    let headers = reader.headers().map_err(|e| FormatError::at(1, e.to_string()))?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    if names != ["payload", "label"] {
        return Err(FormatError::at(1, format!("expected header `payload,label`, found `{}`", names.join(","))));
    }
    let mut out: Vec<RawPayload> = Vec::new();
    let mut seen: HashMap<(String, PayloadLabel), usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            FormatError::at(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(FormatError::at(line, format!("expected 2 fields, found {}", record.len())));
        }
        let label = match record[1].trim() {
            "0" => PayloadLabel::Benign,
            "1" => PayloadLabel::Malicious,
            other => return Err(FormatError::at(line, format!("label must be 0 or 1, found `{other}`"))),
        };
        let text = record[0].to_string();
        match seen.get(&(text.clone(), label)) {
            Some(&i) => out[i].multiplicity += 1,
            None => {
                seen.insert((text.clone(), label), out.len());
                out.push(RawPayload { id: format!("p{:04}", out.len() + 1), text, label, multiplicity: 1 });
            }
        }
    }
    Ok(out)
}

pub fn bundled_corpus() -> Vec<RawPayload> {
    ingest_str(BUNDLED_CORPUS).expect("bundled corpus is well-formed")
}
