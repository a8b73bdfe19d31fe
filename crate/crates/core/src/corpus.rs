//! Reading predicted and gold label files.
//!
//! Two formats are accepted:
//!
//! * JSONL, one object per line: `{"doc_id": "d1", "codes": ["364.11", "364.3"]}`
//! * CSV with header `doc_id,codes`; codes are `;`-separated within the cell.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::augment::LabelSet;
use crate::ontology::{CodeId, OntologyError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{source_name}: {error}")]
    Io {
        source_name: String,
        #[source]
        error: std::io::Error,
    },

    #[error("{source_name}:{line}: {message}")]
    Format {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("{source_name}:{line}: document {doc_id} appears more than once")]
    DuplicateDocId {
        source_name: String,
        line: u64,
        doc_id: String,
    },

    #[error("{source_name}:{line}: document {doc_id} lists code {code} more than once")]
    DuplicateLabel {
        source_name: String,
        line: u64,
        doc_id: String,
        code: String,
    },

    #[error("{source_name}:{line}: document {doc_id}: {error}")]
    Code {
        source_name: String,
        line: u64,
        doc_id: String,
        #[source]
        error: OntologyError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guess from the extension: `.csv` is CSV, everything else JSONL.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// Documents of one corpus file, plus notes about anything that was repaired.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub documents: Vec<LabelSet>,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    doc_id: String,
    codes: Vec<String>,
}

pub fn read_corpus(path: &Path, strict: bool) -> Result<Corpus, CorpusError> {
    let source_name = path.display().to_string();
    let file = File::open(path).map_err(|error| CorpusError::Io {
        source_name: source_name.clone(),
        error,
    })?;
    read_corpus_from(file, CorpusFormat::from_path(path), &source_name, strict)
}

/// Read a corpus from any reader. `source_name` is used in error messages.
///
/// In strict mode a repeated code within a document is an error; otherwise
/// it is dropped and a warning recorded.
pub fn read_corpus_from<R: Read>(
    source: R,
    format: CorpusFormat,
    source_name: &str,
    strict: bool,
) -> Result<Corpus, CorpusError> {
    let mut builder = Builder {
        source_name,
        strict,
        seen: HashSet::new(),
        corpus: Corpus::default(),
    };
    match format {
        CorpusFormat::Jsonl => read_jsonl(source, &mut builder)?,
        CorpusFormat::Csv => read_csv(source, &mut builder)?,
    }
    Ok(builder.corpus)
}

struct Builder<'a> {
    source_name: &'a str,
    strict: bool,
    seen: HashSet<String>,
    corpus: Corpus,
}

impl Builder<'_> {
    fn format_error(&self, line: u64, message: impl Into<String>) -> CorpusError {
        CorpusError::Format {
            source_name: self.source_name.to_owned(),
            line,
            message: message.into(),
        }
    }

    fn push<S: AsRef<str>>(&mut self, line: u64, doc_id: String, codes: &[S]) -> Result<(), CorpusError> {
        if doc_id.is_empty() {
            return Err(self.format_error(line, "empty doc_id"));
        }
        if self.seen.contains(&doc_id) {
            return Err(CorpusError::DuplicateDocId {
                source_name: self.source_name.to_owned(),
                line,
                doc_id,
            });
        }
        let mut parsed = Vec::with_capacity(codes.len());
        for code in codes {
            match CodeId::parse(code.as_ref()) {
                Ok(c) => parsed.push(c),
                Err(error) => {
                    return Err(CorpusError::Code {
                        source_name: self.source_name.to_owned(),
                        line,
                        doc_id,
                        error,
                    })
                }
            }
        }
        let (labels, dropped) = LabelSet::dedup(doc_id.clone(), parsed);
        if let Some(first) = dropped.first() {
            if self.strict {
                return Err(CorpusError::DuplicateLabel {
                    source_name: self.source_name.to_owned(),
                    line,
                    doc_id,
                    code: first.to_string(),
                });
            }
            for code in &dropped {
                self.corpus.warnings.push(format!(
                    "{}:{}: document {}: duplicate code {} removed",
                    self.source_name, line, doc_id, code
                ));
            }
        }
        self.seen.insert(doc_id);
        self.corpus.documents.push(labels);
        Ok(())
    }
}

fn read_jsonl<R: Read>(source: R, builder: &mut Builder<'_>) -> Result<(), CorpusError> {
    let reader = BufReader::new(source);
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|error| CorpusError::Io {
            source_name: builder.source_name.to_owned(),
            error,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonRecord =
            serde_json::from_str(&line).map_err(|e| builder.format_error(line_no, e.to_string()))?;
        builder.push(line_no, record.doc_id, &record.codes)?;
    }
    Ok(())
}

fn read_csv<R: Read>(source: R, builder: &mut Builder<'_>) -> Result<(), CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| builder.format_error(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["doc_id", "codes"] {
        return Err(builder.format_error(1, format!("expected header doc_id,codes, found {}", names.join(","))));
    }
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            builder.format_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let doc_id = record[0].trim().to_owned();
        let codes: Vec<&str> = record[1].split(';').map(str::trim).filter(|c| !c.is_empty()).collect();
        builder.push(line, doc_id, &codes)?;
    }
    Ok(())
}
