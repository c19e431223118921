//! Review state backed by an append-only JSONL log plus periodic snapshots.
//!
//! Every accepted write is appended to `log.jsonl` and fsynced before the
//! in-memory state changes, so an acknowledged write survives a restart.
//! `snapshot.json` records the state after the first `log_entries` lines;
//! on startup the snapshot is loaded and the rest of the log replayed.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ipikit_core::consolidate::{MergedSpan, Region};
use ipikit_core::{
    consolidate, pairwise_relaxed_f1, AdjudicationDecision, AgreementReport, AnnotationRecord, AnnotationSet, Corpus,
    DecisionKind, Document, OverlapMode, SpanAnnotation,
};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One field-level validation problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        FieldError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown document `{0}`")]
    NotFound(String),
    #[error("invalid request")]
    Invalid(Vec<FieldError>),
    #[error("document `{doc_id}` is at version {current}, request was based on version {basis}")]
    Conflict { doc_id: String, current: u64, basis: u64 },
    #[error(transparent)]
    Persist(#[from] Error),
}

/// Body of `POST /docs/{id}/annotations`.
#[derive(Debug, Clone, Deserialize)]
pub struct AnnotationInput {
    #[serde(default)]
    pub doc_id: Option<String>,
    pub start: usize,
    pub end: usize,
    pub label: ipikit_core::Category,
    pub source: String,
    /// When given, must equal the text at `start..end`.
    #[serde(default)]
    pub snippet: Option<String>,
}

/// Body of `POST /docs/{id}/decisions`.
#[derive(Debug, Clone, Deserialize)]
pub struct DecisionInput {
    #[serde(default)]
    pub doc_id: Option<String>,
    pub region: Region,
    pub kind: DecisionKind,
    #[serde(default)]
    pub merged: Option<MergedSpan>,
    pub adjudicator: String,
    #[serde(default)]
    pub timestamp: Option<String>,
    #[serde(default)]
    pub basis_a: Vec<u64>,
    #[serde(default)]
    pub basis_b: Vec<u64>,
    pub basis_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEntry {
    Annotation(AnnotationRecord),
    Decision(AdjudicationDecision),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Snapshot {
    log_entries: usize,
    annotations: Vec<AnnotationRecord>,
    decisions: Vec<AdjudicationDecision>,
    versions: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocSummary {
    pub doc_id: String,
    pub char_len: usize,
    pub version: u64,
    /// Stored span count per source.
    pub annotations: BTreeMap<String, usize>,
    pub decisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocDetail {
    pub doc_id: String,
    pub text: String,
    pub version: u64,
    pub annotations: BTreeMap<String, Vec<AnnotationRecord>>,
    pub decisions: Vec<AdjudicationDecision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UndecidedRegion {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldExport {
    pub source: String,
    pub annotations: Vec<AnnotationRecord>,
    pub undecided: Vec<UndecidedRegion>,
}

struct Persistence {
    dir: PathBuf,
    log: File,
    entries: usize,
    snapshot_every: usize,
}

pub struct Store {
    corpus: Corpus,
    annotator_a: String,
    annotator_b: String,
    /// Accepted spans per document, all sources, in log order.
    annotations: BTreeMap<String, Vec<SpanAnnotation>>,
    decisions: BTreeMap<String, Vec<AdjudicationDecision>>,
    versions: BTreeMap<String, u64>,
    persistence: Option<Persistence>,
}

impl Store {
    /// A store that keeps nothing on disk.
    pub fn in_memory(corpus: Corpus, annotator_a: &str, annotator_b: &str) -> Self {
        Store {
            corpus,
            annotator_a: annotator_a.to_string(),
            annotator_b: annotator_b.to_string(),
            annotations: BTreeMap::new(),
            decisions: BTreeMap::new(),
            versions: BTreeMap::new(),
            persistence: None,
        }
    }

    /// Opens (or creates) the data directory and restores its state.
    pub fn open(
        corpus: Corpus,
        annotator_a: &str,
        annotator_b: &str,
        dir: &Path,
        snapshot_every: usize,
    ) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut store = Store::in_memory(corpus, annotator_a, annotator_b);

        let snapshot_path = dir.join("snapshot.json");
        let mut skip = 0;
        if snapshot_path.exists() {
            let text = fs::read_to_string(&snapshot_path).map_err(|e| Error::io(&snapshot_path, e))?;
            let snapshot: Snapshot = serde_json::from_str(&text).map_err(|source| Error::Json {
                location: crate::error::Location::file(&snapshot_path),
                source,
            })?;
            skip = snapshot.log_entries;
            store.restore(snapshot)?;
        }

        let log_path = dir.join("log.jsonl");
        let entries = read_log(&log_path)?;
        for (idx, entry) in entries.iter().enumerate().skip(skip) {
            store.apply(entry.clone()).map_err(|e| {
                Error::Usage(format!("{}:{}: cannot replay entry: {e}", log_path.display(), idx + 1))
            })?;
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        store.persistence = Some(Persistence {
            dir: dir.to_path_buf(),
            log,
            entries: entries.len(),
            snapshot_every,
        });
        Ok(store)
    }

    /// Builds a store by replaying `entries` in order.
    pub fn replay(
        corpus: Corpus,
        annotator_a: &str,
        annotator_b: &str,
        entries: impl IntoIterator<Item = LogEntry>,
    ) -> Result<Self, StoreError> {
        let mut store = Store::in_memory(corpus, annotator_a, annotator_b);
        for entry in entries {
            store.apply(entry)?;
        }
        Ok(store)
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn annotators(&self) -> (&str, &str) {
        (&self.annotator_a, &self.annotator_b)
    }

    pub fn version(&self, doc_id: &str) -> u64 {
        self.versions.get(doc_id).copied().unwrap_or(0)
    }

    fn document(&self, doc_id: &str) -> Result<&Document, StoreError> {
        self.corpus
            .get(doc_id)
            .ok_or_else(|| StoreError::NotFound(doc_id.to_string()))
    }

    pub fn summaries(&self) -> Vec<DocSummary> {
        self.corpus
            .documents()
            .map(|doc| {
                let mut annotations = BTreeMap::new();
                for span in self.annotations.get(doc.doc_id()).into_iter().flatten() {
                    *annotations.entry(span.source().to_string()).or_insert(0) += 1;
                }
                DocSummary {
                    doc_id: doc.doc_id().to_string(),
                    char_len: doc.char_len(),
                    version: self.version(doc.doc_id()),
                    annotations,
                    decisions: self.decisions.get(doc.doc_id()).map_or(0, Vec::len),
                }
            })
            .collect()
    }

    pub fn detail(&self, doc_id: &str) -> Result<DocDetail, StoreError> {
        let doc = self.document(doc_id)?;
        let mut annotations: BTreeMap<String, Vec<AnnotationRecord>> = BTreeMap::new();
        for span in self.annotations.get(doc_id).into_iter().flatten() {
            annotations
                .entry(span.source().to_string())
                .or_default()
                .push(span.into());
        }
        Ok(DocDetail {
            doc_id: doc_id.to_string(),
            text: doc.text().to_string(),
            version: self.version(doc_id),
            annotations,
            decisions: self.decisions.get(doc_id).cloned().unwrap_or_default(),
        })
    }

    /// Validates and records a span. The span gets the next document version.
    pub fn add_annotation(&mut self, doc_id: &str, input: AnnotationInput) -> Result<AnnotationRecord, StoreError> {
        let doc = self.document(doc_id)?;
        let mut errors = Vec::new();
        if input.doc_id.as_deref().is_some_and(|id| id != doc_id) {
            errors.push(FieldError::new("doc_id", "does not match the document in the path"));
        }
        if input.source.trim().is_empty() {
            errors.push(FieldError::new("source", "must not be empty"));
        }
        if input.start >= input.end {
            errors.push(FieldError::new("end", format!("must be greater than start ({})", input.start)));
        } else if input.end > doc.char_len() {
            errors.push(FieldError::new(
                "end",
                format!("exceeds document length {}", doc.char_len()),
            ));
        } else if let Some(snippet) = &input.snippet {
            if doc.slice(input.start, input.end) != Some(snippet.as_str()) {
                errors.push(FieldError::new("snippet", "does not match the document text at start..end"));
            }
        }
        if !errors.is_empty() {
            return Err(StoreError::Invalid(errors));
        }
        let record = AnnotationRecord {
            doc_id: doc_id.to_string(),
            start: input.start,
            end: input.end,
            label: input.label,
            source: input.source,
            snippet: doc.slice(input.start, input.end).map(str::to_string),
            version: Some(self.version(doc_id) + 1),
        };
        self.commit(LogEntry::Annotation(record.clone()))?;
        Ok(record)
    }

    /// Records an adjudication decision, or rejects it as stale when the
    /// document changed since `basis_version`.
    pub fn add_decision(&mut self, doc_id: &str, input: DecisionInput) -> Result<AdjudicationDecision, StoreError> {
        let doc = self.document(doc_id)?;
        let current = self.version(doc_id);
        if input.basis_version != current {
            return Err(StoreError::Conflict {
                doc_id: doc_id.to_string(),
                current,
                basis: input.basis_version,
            });
        }
        let mut errors = Vec::new();
        if input.doc_id.as_deref().is_some_and(|id| id != doc_id) {
            errors.push(FieldError::new("doc_id", "does not match the document in the path"));
        }
        if input.adjudicator.trim().is_empty() {
            errors.push(FieldError::new("adjudicator", "must not be empty"));
        }
        let spans = self.annotations.get(doc_id).map(Vec::as_slice).unwrap_or(&[]);
        for (field, source, basis) in [
            ("basis_a", &self.annotator_a, &input.basis_a),
            ("basis_b", &self.annotator_b, &input.basis_b),
        ] {
            for version in basis {
                if !spans.iter().any(|s| s.source() == source && s.version() == *version) {
                    errors.push(FieldError::new(
                        field,
                        format!("no `{source}` annotation with version {version}"),
                    ));
                }
            }
        }
        let decision = AdjudicationDecision {
            doc_id: doc_id.to_string(),
            region: input.region,
            kind: input.kind,
            merged: input.merged,
            adjudicator: input.adjudicator,
            timestamp: input.timestamp.unwrap_or_else(now),
            basis_a: input.basis_a,
            basis_b: input.basis_b,
            basis_version: input.basis_version,
            version: current + 1,
        };
        if let Err(e) = decision.validate(doc) {
            errors.push(FieldError::new(
                if decision.merged.is_some() { "merged" } else { "region" },
                e.to_string(),
            ));
        }
        if !errors.is_empty() {
            return Err(StoreError::Invalid(errors));
        }
        self.commit(LogEntry::Decision(decision.clone()))?;
        Ok(decision)
    }

    /// Gold standard for the whole corpus: a fold of the decision log over
    /// the two annotators' spans. Documents come in id order.
    pub fn export_gold(&self) -> Result<GoldExport, StoreError> {
        let mut annotations = Vec::new();
        let mut undecided = Vec::new();
        let (a, b) = self.annotator_sets();
        for doc in self.corpus.documents() {
            let id = doc.doc_id();
            let decisions = self.decisions.get(id).map(Vec::as_slice).unwrap_or(&[]);
            let folded = consolidate(doc, a.spans(id), b.spans(id), decisions).map_err(Error::from)?;
            annotations.extend(folded.gold.iter().map(AnnotationRecord::from));
            undecided.extend(folded.undecided.into_iter().map(|r| UndecidedRegion {
                doc_id: id.to_string(),
                start: r.start,
                end: r.end,
            }));
        }
        Ok(GoldExport {
            source: ipikit_core::consolidate::GOLD_SOURCE.to_string(),
            annotations,
            undecided,
        })
    }

    pub fn iaa(&self, mode: OverlapMode) -> Result<AgreementReport, StoreError> {
        let (a, b) = self.annotator_sets();
        Ok(pairwise_relaxed_f1(&a, &b, &self.corpus, mode).map_err(Error::from)?)
    }

    fn annotator_sets(&self) -> (AnnotationSet, AnnotationSet) {
        let pick = |source: &str| {
            AnnotationSet::from_spans(
                source,
                self.annotations
                    .values()
                    .flatten()
                    .filter(|s| s.source() == source)
                    .cloned(),
            )
        };
        (pick(&self.annotator_a), pick(&self.annotator_b))
    }

    /// All state as log entries, in the order they were accepted per document.
    pub fn entries(&self) -> Vec<LogEntry> {
        let mut out: Vec<(u64, LogEntry)> = Vec::new();
        for spans in self.annotations.values() {
            out.extend(spans.iter().map(|s| (s.version(), LogEntry::Annotation(s.into()))));
        }
        for decisions in self.decisions.values() {
            out.extend(decisions.iter().map(|d| (d.version, LogEntry::Decision(d.clone()))));
        }
        out.sort_by(|(va, a), (vb, b)| (entry_doc(a), va).cmp(&(entry_doc(b), vb)));
        out.into_iter().map(|(_, e)| e).collect()
    }

    fn commit(&mut self, entry: LogEntry) -> Result<(), StoreError> {
        if let Some(p) = &mut self.persistence {
            let mut line = serde_json::to_vec(&entry).expect("log entries serialize");
            line.push(b'\n');
            let path = p.dir.join("log.jsonl");
            p.log.write_all(&line).map_err(|e| Error::io(&path, e))?;
            p.log.sync_data().map_err(|e| Error::io(&path, e))?;
            p.entries += 1;
        }
        self.apply(entry)?;
        let due = self
            .persistence
            .as_ref()
            .is_some_and(|p| p.snapshot_every > 0 && p.entries % p.snapshot_every == 0);
        if due {
            self.snapshot()?;
        }
        Ok(())
    }

    /// Writes `snapshot.json` atomically (temp file, fsync, rename).
    pub fn snapshot(&self) -> Result<(), StoreError> {
        let Some(p) = &self.persistence else {
            return Ok(());
        };
        let snapshot = Snapshot {
            log_entries: p.entries,
            annotations: self.annotations.values().flatten().map(AnnotationRecord::from).collect(),
            decisions: self.decisions.values().flatten().cloned().collect(),
            versions: self.versions.clone(),
        };
        let tmp = p.dir.join("snapshot.json.tmp");
        let target = p.dir.join("snapshot.json");
        let body = serde_json::to_vec(&snapshot).expect("snapshot serializes");
        let mut file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        file.write_all(&body).map_err(|e| Error::io(&tmp, e))?;
        file.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;
        Ok(())
    }

    fn restore(&mut self, snapshot: Snapshot) -> Result<(), StoreError> {
        for record in &snapshot.annotations {
            let span = self.corpus.bind(record).map_err(Error::from)?;
            self.annotations.entry(record.doc_id.clone()).or_default().push(span);
        }
        for decision in snapshot.decisions {
            self.decisions.entry(decision.doc_id.clone()).or_default().push(decision);
        }
        self.versions = snapshot.versions;
        Ok(())
    }

    /// Applies an already accepted entry. Replay re-checks versions, so a
    /// log that was edited out of order is refused rather than misread.
    fn apply(&mut self, entry: LogEntry) -> Result<(), StoreError> {
        let doc_id = entry_doc(&entry).to_string();
        let doc = self.document(&doc_id)?;
        let expected = self.version(&doc_id) + 1;
        let version = match &entry {
            LogEntry::Annotation(r) => r.version.unwrap_or(0),
            LogEntry::Decision(d) => d.version,
        };
        if version != expected {
            return Err(StoreError::Conflict {
                doc_id,
                current: expected - 1,
                basis: version,
            });
        }
        match entry {
            LogEntry::Annotation(record) => {
                let span = record.bind(doc).map_err(Error::from)?;
                self.annotations.entry(doc_id.clone()).or_default().push(span);
            }
            LogEntry::Decision(decision) => {
                decision.validate(doc).map_err(Error::from)?;
                self.decisions.entry(doc_id.clone()).or_default().push(decision);
            }
        }
        self.versions.insert(doc_id, version);
        Ok(())
    }
}

fn entry_doc(entry: &LogEntry) -> &str {
    match entry {
        LogEntry::Annotation(r) => &r.doc_id,
        LogEntry::Decision(d) => &d.doc_id,
    }
}

/// Reads the log, dropping a torn final line left by a crash mid-append.
fn read_log(path: &Path) -> Result<Vec<LogEntry>, StoreError> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e).into()),
    };
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    if complete < text.len() {
        let file = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
        file.set_len(complete as u64).map_err(|e| Error::io(path, e))?;
        file.sync_all().map_err(|e| Error::io(path, e))?;
    }
    let mut entries = Vec::new();
    for (idx, line) in text[..complete].lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(line).map_err(|source| Error::Json {
            location: crate::error::Location::line(path, idx + 1),
            source,
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

fn now() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    secs.to_string()
}
