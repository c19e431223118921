//! Splitting long documents into token-bounded sections at line breaks.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Document, SpanAnnotation, Token};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub doc_id: String,
    pub section_index: usize,
    pub start: usize,
    pub end: usize,
    pub token_count: usize,
}

impl Section {
    pub fn contains(&self, span: &SpanAnnotation) -> bool {
        span.doc_id() == self.doc_id && span.start() >= self.start && span.end() <= self.end
    }

    /// Offsets of `span` relative to the section start.
    pub fn localize(&self, span: &SpanAnnotation) -> Option<(usize, usize)> {
        self.contains(span)
            .then(|| (span.start() - self.start, span.end() - self.start))
    }
}

/// Greedily packs whole lines into sections of at most `max_tokens` tokens.
///
/// A section boundary sits right after a `\n`. Boundaries that would cut a
/// span are never used, so the section closes at the latest earlier line
/// break instead. Sections are contiguous and together cover the whole text,
/// including trailing whitespace.
pub fn section_document(
    doc: &Document,
    tokens: &[Token],
    max_tokens: usize,
    spans: &[SpanAnnotation],
) -> Result<Vec<Section>> {
    for span in spans {
        span.verify(doc)?;
    }
    let len = doc.char_len();

    // Line ends: positions just after each '\n' (excluding the text end).
    let mut line_ends: Vec<usize> = doc
        .text()
        .chars()
        .enumerate()
        .filter(|(i, c)| *c == '\n' && i + 1 < len)
        .map(|(i, _)| i + 1)
        .collect();
    line_ends.push(len);

    let count_tokens = |from: usize, to: usize| {
        let lo = tokens.partition_point(|t| t.start < from);
        let hi = tokens.partition_point(|t| t.start < to);
        hi - lo
    };

    let mut line_start = 0;
    for (line, &end) in line_ends.iter().enumerate() {
        let n = count_tokens(line_start, end);
        if n > max_tokens {
            return Err(Error::LineTooLong {
                doc_id: doc.doc_id().to_string(),
                line: line + 1,
                tokens: n,
                max_tokens,
            });
        }
        line_start = end;
    }

    let crossing = |p: usize| spans.iter().find(|s| s.start() < p && p < s.end());

    // Blocks: runs of lines glued together by spans crossing their breaks.
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    let mut block_start = 0;
    for &end in &line_ends {
        if end == len || crossing(end).is_none() {
            blocks.push((block_start, end));
            block_start = end;
        }
    }

    let mut sections: Vec<Section> = Vec::new();
    let mut current: Option<(usize, usize, usize)> = None;
    for (start, end) in blocks {
        let n = count_tokens(start, end);
        if n > max_tokens {
            // Only multi-line blocks can get here; the line check ran above.
            let span = spans
                .iter()
                .filter(|s| s.start() < end && s.end() > start)
                .find(|s| line_ends.iter().any(|&p| s.start() < p && p < s.end()))
                .expect("oversized block is held together by a span");
            return Err(Error::UnsplittableSpan {
                doc_id: doc.doc_id().to_string(),
                start: span.start(),
                end: span.end(),
                tokens: n,
                max_tokens,
            });
        }
        current = match current {
            Some((s, _, c)) if c + n <= max_tokens => Some((s, end, c + n)),
            Some((s, e, c)) => {
                sections.push(section(doc, sections.len(), s, e, c));
                Some((start, end, n))
            }
            None => Some((start, end, n)),
        };
    }
    match current {
        Some((s, e, c)) => sections.push(section(doc, sections.len(), s, e, c)),
        None => sections.push(section(doc, 0, 0, 0, 0)),
    }
    Ok(sections)
}

fn section(doc: &Document, index: usize, start: usize, end: usize, token_count: usize) -> Section {
    Section {
        doc_id: doc.doc_id().to_string(),
        section_index: index,
        start,
        end,
        token_count,
    }
}
