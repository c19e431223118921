//! Documents, tokens, span annotations and the span algebra.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::category::Category;
use crate::error::{Error, Result};
use crate::tokenize::tokenize;

/// Half-open character interval overlap test.
#[inline]
pub fn intervals_overlap(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0.max(b.0) < a.1.min(b.1)
}

/// A source text. The text never changes after construction; every offset
/// elsewhere in the crate indexes into it by Unicode scalar value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    doc_id: String,
    text: String,
    meta: BTreeMap<String, String>,
    /// Byte offset of every char, plus `text.len()` as a sentinel.
    char_bytes: Vec<usize>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let mut char_bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        char_bytes.push(text.len());
        Document {
            doc_id: doc_id.into(),
            text,
            meta: BTreeMap::new(),
            char_bytes,
        }
    }

    pub fn with_meta(mut self, meta: BTreeMap<String, String>) -> Self {
        self.meta = meta;
        self
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    /// Length in chars.
    pub fn char_len(&self) -> usize {
        self.char_bytes.len() - 1
    }

    pub fn byte_offset(&self, char_offset: usize) -> Option<usize> {
        self.char_bytes.get(char_offset).copied()
    }

    /// Char offset of a byte offset lying on a char boundary.
    pub fn char_offset(&self, byte_offset: usize) -> Option<usize> {
        self.char_bytes.binary_search(&byte_offset).ok()
    }

    pub fn check_bounds(&self, start: usize, end: usize) -> Result<()> {
        if start >= end {
            return Err(Error::EmptySpan { start, end });
        }
        if end > self.char_len() {
            return Err(Error::OutOfBounds {
                doc_id: self.doc_id.clone(),
                start,
                end,
                len: self.char_len(),
            });
        }
        Ok(())
    }

    /// Text between two char offsets; `None` when out of range.
    pub fn slice(&self, start: usize, end: usize) -> Option<&str> {
        if start > end {
            return None;
        }
        let b0 = self.byte_offset(start)?;
        let b1 = self.byte_offset(end)?;
        Some(&self.text[b0..b1])
    }
}

/// A token with char offsets into its document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Labeled character span. Fields are private: a span can only be built
/// against its document (or with a snippet whose length matches), so the
/// snippet always mirrors the text it covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpanAnnotation {
    doc_id: String,
    start: usize,
    end: usize,
    #[serde(rename = "label")]
    category: Category,
    snippet: String,
    source: String,
    version: u64,
}

impl SpanAnnotation {
    pub fn new(
        doc: &Document,
        start: usize,
        end: usize,
        category: Category,
        source: impl Into<String>,
    ) -> Result<Self> {
        doc.check_bounds(start, end)?;
        let snippet = doc.slice(start, end).unwrap_or_default().to_string();
        Ok(SpanAnnotation {
            doc_id: doc.doc_id().to_string(),
            start,
            end,
            category,
            snippet,
            source: source.into(),
            version: 0,
        })
    }

    /// Builds a span without the document at hand. The snippet must have
    /// exactly `end - start` chars; use [`SpanAnnotation::verify`] once the
    /// document is available.
    pub fn from_parts(
        doc_id: impl Into<String>,
        start: usize,
        end: usize,
        category: Category,
        snippet: impl Into<String>,
        source: impl Into<String>,
    ) -> Result<Self> {
        let snippet = snippet.into();
        let doc_id = doc_id.into();
        if start >= end {
            return Err(Error::EmptySpan { start, end });
        }
        if snippet.chars().count() != end - start {
            return Err(Error::StaleSnippet { doc_id, start, end });
        }
        Ok(SpanAnnotation {
            doc_id,
            start,
            end,
            category,
            snippet,
            source: source.into(),
            version: 0,
        })
    }

    pub fn with_version(mut self, version: u64) -> Self {
        self.version = version;
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }
    pub fn start(&self) -> usize {
        self.start
    }
    pub fn end(&self) -> usize {
        self.end
    }
    pub fn range(&self) -> (usize, usize) {
        (self.start, self.end)
    }
    pub fn len(&self) -> usize {
        self.end - self.start
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn category(&self) -> Category {
        self.category
    }
    pub fn snippet(&self) -> &str {
        &self.snippet
    }
    pub fn source(&self) -> &str {
        &self.source
    }
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Identity used for deduplication.
    pub fn key(&self) -> (usize, usize, Category) {
        (self.start, self.end, self.category)
    }

    /// Checks the span against its document: same id, in bounds, and the
    /// snippet still matches the text.
    pub fn verify(&self, doc: &Document) -> Result<()> {
        if doc.doc_id() != self.doc_id {
            return Err(Error::DocumentMismatch {
                left: self.doc_id.clone(),
                right: doc.doc_id().to_string(),
            });
        }
        doc.check_bounds(self.start, self.end)?;
        if doc.slice(self.start, self.end) != Some(self.snippet.as_str()) {
            return Err(Error::StaleSnippet {
                doc_id: self.doc_id.clone(),
                start: self.start,
                end: self.end,
            });
        }
        Ok(())
    }

    pub fn overlaps(&self, other: &SpanAnnotation) -> Result<bool> {
        overlaps(self, other)
    }
}

/// True iff the two spans share at least one character.
pub fn overlaps(a: &SpanAnnotation, b: &SpanAnnotation) -> Result<bool> {
    same_doc(a, b)?;
    Ok(intervals_overlap(a.range(), b.range()))
}

fn same_doc(a: &SpanAnnotation, b: &SpanAnnotation) -> Result<()> {
    if a.doc_id != b.doc_id {
        return Err(Error::DocumentMismatch {
            left: a.doc_id.clone(),
            right: b.doc_id.clone(),
        });
    }
    Ok(())
}

/// Tokens (sorted, non-overlapping) that overlap the char interval.
pub fn tokens_in(tokens: &[Token], range: (usize, usize)) -> &[Token] {
    let lo = tokens.partition_point(|t| t.end <= range.0);
    let hi = tokens.partition_point(|t| t.start < range.1);
    if lo >= hi {
        &tokens[0..0]
    } else {
        &tokens[lo..hi]
    }
}

/// Index range `lo..hi` of tokens overlapping the char interval.
pub fn token_index_range(tokens: &[Token], range: (usize, usize)) -> core::ops::Range<usize> {
    let lo = tokens.partition_point(|t| t.end <= range.0);
    let hi = tokens.partition_point(|t| t.start < range.1);
    lo..hi.max(lo)
}

/// Number of tokens overlapping both spans by at least one character.
pub fn token_overlap_count(a: &SpanAnnotation, b: &SpanAnnotation, tokens: &[Token]) -> Result<usize> {
    same_doc(a, b)?;
    Ok(tokens_in(tokens, a.range())
        .iter()
        .filter(|t| intervals_overlap((t.start, t.end), b.range()))
        .count())
}

/// Unions overlapping spans of the same category. Touching spans (one ends
/// where the next starts) stay separate. Output is sorted by
/// `(start, end, category)`; exact duplicates collapse.
///
/// Merged spans keep the first span's source and the highest version; their
/// snippet is stitched from the inputs' snippets.
pub fn merge_same_category(spans: Vec<SpanAnnotation>) -> Vec<SpanAnnotation> {
    let mut by_cat: BTreeMap<(String, Category), Vec<SpanAnnotation>> = BTreeMap::new();
    for span in spans {
        by_cat
            .entry((span.doc_id.clone(), span.category))
            .or_default()
            .push(span);
    }
    let mut out = Vec::new();
    for (_, mut group) in by_cat {
        group.sort_by_key(|s| (s.start, s.end));
        let mut iter = group.into_iter();
        let Some(mut current) = iter.next() else {
            continue;
        };
        for next in iter {
            if next.start < current.end {
                if next.end > current.end {
                    let skip = current.end - next.start;
                    current.snippet.extend(next.snippet.chars().skip(skip));
                    current.end = next.end;
                }
                current.version = current.version.max(next.version);
            } else {
                out.push(core::mem::replace(&mut current, next));
            }
        }
        out.push(current);
    }
    sort_spans(&mut out);
    out
}

pub(crate) fn sort_spans(spans: &mut [SpanAnnotation]) {
    spans.sort_by(|a, b| {
        (a.doc_id.as_str(), a.start, a.end, a.category).cmp(&(
            b.doc_id.as_str(),
            b.start,
            b.end,
            b.category,
        ))
    });
}

/// Canonical annotation line: `{"doc_id","start","end","label","source"}`,
/// with optional `snippet` and `version`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub label: Category,
    #[serde(default)]
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u64>,
}

impl AnnotationRecord {
    /// Resolves the record against its document. A supplied snippet must
    /// match the text it points at.
    pub fn bind(&self, doc: &Document) -> Result<SpanAnnotation> {
        if doc.doc_id() != self.doc_id {
            return Err(Error::DocumentMismatch {
                left: self.doc_id.clone(),
                right: doc.doc_id().to_string(),
            });
        }
        let span = SpanAnnotation::new(doc, self.start, self.end, self.label, self.source.clone())?
            .with_version(self.version.unwrap_or(0));
        if let Some(snippet) = &self.snippet {
            if snippet != span.snippet() {
                return Err(Error::StaleSnippet {
                    doc_id: self.doc_id.clone(),
                    start: self.start,
                    end: self.end,
                });
            }
        }
        Ok(span)
    }
}

impl From<&SpanAnnotation> for AnnotationRecord {
    fn from(span: &SpanAnnotation) -> Self {
        AnnotationRecord {
            doc_id: span.doc_id.clone(),
            start: span.start,
            end: span.end,
            label: span.category,
            source: span.source.clone(),
            snippet: Some(span.snippet.clone()),
            version: Some(span.version),
        }
    }
}

/// All spans one annotator (or system) produced, grouped by document.
///
/// The set is kept normalized: exact duplicates removed and overlapping
/// same-category spans merged. Spans of different categories may overlap.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationSet {
    source: String,
    docs: BTreeMap<String, Vec<SpanAnnotation>>,
}

impl AnnotationSet {
    pub fn new(source: impl Into<String>) -> Self {
        AnnotationSet {
            source: source.into(),
            docs: BTreeMap::new(),
        }
    }

    pub fn from_spans(source: impl Into<String>, spans: impl IntoIterator<Item = SpanAnnotation>) -> Self {
        let mut grouped: BTreeMap<String, Vec<SpanAnnotation>> = BTreeMap::new();
        for span in spans {
            grouped.entry(span.doc_id.clone()).or_default().push(span);
        }
        let docs = grouped
            .into_iter()
            .map(|(id, spans)| (id, merge_same_category(spans)))
            .collect();
        AnnotationSet {
            source: source.into(),
            docs,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn insert(&mut self, span: SpanAnnotation) {
        let entry = self.docs.entry(span.doc_id.clone()).or_default();
        entry.push(span);
        let spans = core::mem::take(entry);
        *entry = merge_same_category(spans);
    }

    /// Registers a document with no spans, so it counts as covered.
    pub fn touch(&mut self, doc_id: impl Into<String>) {
        self.docs.entry(doc_id.into()).or_default();
    }

    pub fn spans(&self, doc_id: &str) -> &[SpanAnnotation] {
        self.docs.get(doc_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SpanAnnotation> {
        self.docs.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.docs.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A set of documents with their tokenization.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: BTreeMap<String, (Document, Vec<Token>)>,
}

impl Corpus {
    pub fn new(docs: impl IntoIterator<Item = Document>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for doc in docs {
            corpus.add(doc)?;
        }
        Ok(corpus)
    }

    pub fn add(&mut self, doc: Document) -> Result<()> {
        if self.docs.contains_key(doc.doc_id()) {
            return Err(Error::DuplicateDocument(doc.doc_id().to_string()));
        }
        let tokens = tokenize(doc.text());
        self.docs.insert(doc.doc_id().to_string(), (doc, tokens));
        Ok(())
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.docs.get(doc_id).map(|(d, _)| d)
    }

    pub fn tokens(&self, doc_id: &str) -> Option<&[Token]> {
        self.docs.get(doc_id).map(|(_, t)| t.as_slice())
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.docs.values().map(|(d, _)| d)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Binds records to their documents; unknown documents are an error.
    pub fn bind(&self, record: &AnnotationRecord) -> Result<SpanAnnotation> {
        let doc = self
            .get(&record.doc_id)
            .ok_or_else(|| Error::UnknownDocument(record.doc_id.clone()))?;
        record.bind(doc)
    }
}
