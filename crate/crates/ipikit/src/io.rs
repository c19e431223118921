//! JSONL readers and writers, CoNLL export and split manifests.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ipikit_core::{AnnotationRecord, AnnotationSet, BioSequence, Category, Corpus, CorpusSplit, Document, RedactionPolicy};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl From<DocumentRecord> for Document {
    fn from(r: DocumentRecord) -> Self {
        Document::new(r.doc_id, r.text).with_meta(r.meta)
    }
}

impl From<&Document> for DocumentRecord {
    fn from(d: &Document) -> Self {
        DocumentRecord {
            doc_id: d.doc_id().to_string(),
            text: d.text().to_string(),
            meta: d.meta().clone(),
        }
    }
}

/// Free-text model output awaiting grounding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub doc_id: String,
    pub label: Category,
    pub snippets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactedRecord {
    pub doc_id: String,
    pub text: String,
    pub policy_fingerprint: String,
}

/// Parses every non-blank line of `path`, keeping 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| Error::Io {
            location: Location::line(path, line_no),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| Error::Json {
            location: Location::line(path, line_no),
            source,
        })?;
        out.push((line_no, value));
    }
    Ok(out)
}

pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, items: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for (line, record) in read_jsonl::<DocumentRecord>(path)? {
        corpus.add(record.into()).map_err(|source| Error::Data {
            location: Location::line(path, line),
            source,
        })?;
    }
    Ok(corpus)
}

pub fn load_records(path: &Path) -> Result<Vec<(usize, AnnotationRecord)>> {
    read_jsonl(path)
}

/// Binds annotation lines to `corpus`. The set is named after the first
/// record's `source`, or the file stem when records carry none.
pub fn load_annotations(path: &Path, corpus: &Corpus) -> Result<AnnotationSet> {
    let records = load_records(path)?;
    let name = records
        .iter()
        .map(|(_, r)| r.source.as_str())
        .find(|s| !s.is_empty())
        .map(str::to_string)
        .unwrap_or_else(|| file_stem(path));
    let mut spans = Vec::with_capacity(records.len());
    for (line, mut record) in records {
        if record.source.is_empty() {
            record.source = name.clone();
        }
        let span = corpus.bind(&record).map_err(|source| Error::Data {
            location: Location::line(path, line),
            source,
        })?;
        spans.push(span);
    }
    Ok(AnnotationSet::from_spans(name, spans))
}

pub fn load_extractions(path: &Path, corpus: &Corpus) -> Result<Vec<ExtractionRecord>> {
    let mut out = Vec::new();
    for (line, record) in read_jsonl::<ExtractionRecord>(path)? {
        if corpus.get(&record.doc_id).is_none() {
            return Err(Error::Data {
                location: Location::line(path, line),
                source: ipikit_core::Error::UnknownDocument(record.doc_id),
            });
        }
        out.push(record);
    }
    Ok(out)
}

/// Reads a policy from TOML, or from JSON when the file ends in `.json`.
pub fn load_policy(path: &Path) -> Result<RedactionPolicy> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|source| Error::Json {
            location: Location::file(path),
            source,
        })
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "annotations".to_string())
}

/// CoNLL-style export: a `-DOCSTART- <doc_id> <section_index>` line, one
/// `token<TAB>label` line per token, then a blank line.
pub fn write_conll<W: Write>(mut out: W, sequences: &[BioSequence]) -> std::io::Result<()> {
    for seq in sequences {
        writeln!(out, "-DOCSTART- {} {}", seq.doc_id(), seq.section_index())?;
        for (token, label) in seq.iter() {
            writeln!(out, "{}\t{}", token.text, label)?;
        }
        writeln!(out)?;
    }
    out.flush()
}

pub fn split_manifest(split: &CorpusSplit) -> String {
    serde_json::to_string_pretty(split).expect("split manifest serializes")
}
