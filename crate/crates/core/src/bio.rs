//! Span annotations to token-level BIO labels and back.

use core::fmt;
use core::str::FromStr;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::category::Category;
use crate::error::{Error, Result};
use crate::model::{token_index_range, Document, SpanAnnotation, Token};
use crate::section::Section;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioLabel {
    Outside,
    Begin(Category),
    Inside(Category),
}

impl BioLabel {
    pub fn category(self) -> Option<Category> {
        match self {
            BioLabel::Outside => None,
            BioLabel::Begin(c) | BioLabel::Inside(c) => Some(c),
        }
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioLabel::Outside => f.write_str("O"),
            BioLabel::Begin(c) => write!(f, "B-{c}"),
            BioLabel::Inside(c) => write!(f, "I-{c}"),
        }
    }
}

impl FromStr for BioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(BioLabel::Outside);
        }
        match s.split_once('-') {
            Some(("B", cat)) => Ok(BioLabel::Begin(cat.parse()?)),
            Some(("I", cat)) => Ok(BioLabel::Inside(cat.parse()?)),
            _ => Err(Error::UnknownCategory(s.to_string())),
        }
    }
}

/// Token labels for one section of a document. Always well formed: every
/// `I-X` follows a `B-X` or `I-X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioSequence {
    doc_id: String,
    section_index: usize,
    tokens: Vec<Token>,
    labels: Vec<BioLabel>,
}

impl BioSequence {
    pub fn new(
        doc_id: impl Into<String>,
        section_index: usize,
        tokens: Vec<Token>,
        labels: Vec<BioLabel>,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        if tokens.len() != labels.len() {
            return Err(Error::MalformedBio {
                doc_id,
                index: tokens.len().min(labels.len()),
                reason: format!("{} tokens but {} labels", tokens.len(), labels.len()),
            });
        }
        let mut prev = BioLabel::Outside;
        for (index, label) in labels.iter().enumerate() {
            if let BioLabel::Inside(cat) = label {
                if prev.category() != Some(*cat) {
                    return Err(Error::MalformedBio {
                        doc_id,
                        index,
                        reason: format!("{label} follows {prev}"),
                    });
                }
            }
            prev = *label;
        }
        Ok(BioSequence {
            doc_id,
            section_index,
            tokens,
            labels,
        })
    }

    /// Parses string labels (`O`, `B-CAT`, `I-CAT`).
    pub fn from_strings<S: AsRef<str>>(
        doc_id: impl Into<String>,
        section_index: usize,
        tokens: Vec<Token>,
        labels: &[S],
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        let parsed = labels
            .iter()
            .enumerate()
            .map(|(index, l)| {
                l.as_ref().parse::<BioLabel>().map_err(|_| Error::MalformedBio {
                    doc_id: doc_id.clone(),
                    index,
                    reason: format!("unknown label `{}`", l.as_ref()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        BioSequence::new(doc_id, section_index, tokens, parsed)
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }
    pub fn section_index(&self) -> usize {
        self.section_index
    }
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }
    pub fn labels(&self) -> &[BioLabel] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Token, BioLabel)> {
        self.tokens.iter().zip(self.labels.iter().copied())
    }
}

/// Labels every token overlapped (by at least one char) by a span.
///
/// Spans are first snapped to the tokens they touch and same-category token
/// ranges that share a token are joined. When categories collide on a token
/// the higher-priority category wins. A `B-` starts each token range, so two
/// adjacent ranges of one category stay distinguishable.
pub fn spans_to_bio(doc: &Document, tokens: &[Token], spans: &[SpanAnnotation]) -> Result<BioSequence> {
    build(doc, 0, tokens.to_vec(), spans)
}

/// Same as [`spans_to_bio`] restricted to one section. Spans outside the
/// section are ignored; tokens keep document-level offsets.
pub fn section_to_bio(
    doc: &Document,
    tokens: &[Token],
    section: &Section,
    spans: &[SpanAnnotation],
) -> Result<BioSequence> {
    let local: Vec<Token> = tokens
        .iter()
        .filter(|t| t.start >= section.start && t.end <= section.end)
        .cloned()
        .collect();
    let inside: Vec<SpanAnnotation> = spans
        .iter()
        .filter(|s| s.start() >= section.start && s.end() <= section.end)
        .cloned()
        .collect();
    build(doc, section.section_index, local, &inside)
}

fn build(doc: &Document, section_index: usize, tokens: Vec<Token>, spans: &[SpanAnnotation]) -> Result<BioSequence> {
    for span in spans {
        span.verify(doc)?;
    }

    let mut ranges: BTreeMap<Category, Vec<(usize, usize)>> = BTreeMap::new();
    for span in spans {
        let r = token_index_range(&tokens, span.range());
        if r.start < r.end {
            ranges.entry(span.category()).or_default().push((r.start, r.end));
        }
    }

    // owner[i] = (priority rank, range start, category)
    let mut owner: Vec<Option<(usize, usize, Category)>> = alloc::vec![None; tokens.len()];
    for (cat, mut list) in ranges {
        list.sort_unstable();
        let mut joined: Vec<(usize, usize)> = Vec::new();
        for (lo, hi) in list {
            match joined.last_mut() {
                Some(last) if lo < last.1 => last.1 = last.1.max(hi),
                _ => joined.push((lo, hi)),
            }
        }
        for (lo, hi) in joined {
            let candidate = (cat.priority_rank(), lo, cat);
            for slot in &mut owner[lo..hi] {
                match slot {
                    Some(current) if (current.0, current.1) <= (candidate.0, candidate.1) => {}
                    _ => *slot = Some(candidate),
                }
            }
        }
    }

    let mut labels = Vec::with_capacity(tokens.len());
    let mut prev = None;
    for slot in &owner {
        let label = match slot {
            None => BioLabel::Outside,
            Some(o) if prev == Some(*o) => BioLabel::Inside(o.2),
            Some(o) => BioLabel::Begin(o.2),
        };
        labels.push(label);
        prev = *slot;
    }
    BioSequence::new(doc.doc_id(), section_index, tokens, labels)
}

/// One span per `B`/`I` run, snapped to the first token's start and the last
/// token's end.
pub fn bio_to_spans(seq: &BioSequence, doc: &Document) -> Result<Vec<SpanAnnotation>> {
    if seq.doc_id() != doc.doc_id() {
        return Err(Error::DocumentMismatch {
            left: seq.doc_id().to_string(),
            right: doc.doc_id().to_string(),
        });
    }
    let mut spans = Vec::new();
    let mut open: Option<(usize, usize, Category)> = None;
    let mut flush = |open: &mut Option<(usize, usize, Category)>| -> Result<()> {
        if let Some((start, end, cat)) = open.take() {
            spans.push(SpanAnnotation::new(doc, start, end, cat, "bio")?);
        }
        Ok(())
    };
    for (token, label) in seq.iter() {
        match label {
            BioLabel::Outside => flush(&mut open)?,
            BioLabel::Begin(cat) => {
                flush(&mut open)?;
                open = Some((token.start, token.end, cat));
            }
            BioLabel::Inside(_) => {
                if let Some(o) = open.as_mut() {
                    o.1 = token.end;
                }
            }
        }
    }
    flush(&mut open)?;
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::tokenize;
    use alloc::vec;
    use alloc::vec::Vec;

    fn labels(seq: &BioSequence) -> Vec<String> {
        seq.labels().iter().map(|l| l.to_string()).collect()
    }

    #[test]
    fn run_over_tokens_three_to_five() {
        let doc = Document::new("d", "t0 t1 t2 t3 t4 t5");
        let tokens = tokenize(doc.text());
        let span = SpanAnnotation::new(&doc, 9, 17, Category::RelTime, "a").unwrap();
        let seq = spans_to_bio(&doc, &tokens, &[span]).unwrap();
        assert_eq!(labels(&seq), vec!["O", "O", "O", "B-RELTIME", "I-RELTIME", "I-RELTIME"]);
        let none = spans_to_bio(&doc, &tokens, &[]).unwrap();
        assert!(none.labels().iter().all(|l| *l == BioLabel::Outside));
    }

    #[test]
    fn mid_token_start_labels_whole_token() {
        let doc = Document::new("d", "alpha beta");
        let tokens = tokenize(doc.text());
        let span = SpanAnnotation::new(&doc, 2, 4, Category::Body, "a").unwrap();
        let seq = spans_to_bio(&doc, &tokens, &[span]).unwrap();
        assert_eq!(labels(&seq), vec!["B-BODY", "O"]);
        let back = bio_to_spans(&seq, &doc).unwrap();
        assert_eq!(back[0].range(), (0, 5));
    }

    /// Exhaustive check over every (one token, one span) placement in a small
    /// padded document: the token is labeled iff the char intervals overlap.
    #[test]
    fn single_token_single_span_exhaustive() {
        let text = "  word  ";
        let doc = Document::new("d", text);
        let tokens = tokenize(text);
        assert_eq!(tokens.len(), 1);
        let n = doc.char_len();
        for start in 0..n {
            for end in start + 1..=n {
                let span = SpanAnnotation::new(&doc, start, end, Category::Family, "a").unwrap();
                let seq = spans_to_bio(&doc, &tokens, &[span]).unwrap();
                let brute = (start..end).any(|c| (2..6).contains(&c));
                let expected = if brute { BioLabel::Begin(Category::Family) } else { BioLabel::Outside };
                assert_eq!(seq.labels()[0], expected, "span {start}..{end}");
            }
        }
    }

    #[test]
    fn priority_resolves_conflicts() {
        let doc = Document::new("d", "lives in a halfway house today");
        let tokens = tokenize(doc.text());
        let details = SpanAnnotation::new(&doc, 0, 24, Category::Details, "a").unwrap();
        let phi = SpanAnnotation::new(&doc, 11, 18, Category::PhiRef, "a").unwrap();
        let seq = spans_to_bio(&doc, &tokens, &[details, phi]).unwrap();
        assert_eq!(
            labels(&seq),
            vec!["B-DETAILS", "I-DETAILS", "I-DETAILS", "B-PHI_REF", "B-DETAILS", "O"]
        );
    }

    #[test]
    fn decode_examples() {
        let doc = Document::new("d", "a b c d");
        let tokens = tokenize(doc.text());
        let seq = BioSequence::from_strings("d", 0, tokens.clone(), &["O", "B-FAMILY", "I-FAMILY", "O"]).unwrap();
        let spans = bio_to_spans(&seq, &doc).unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].range(), (2, 5));

        let all_o = BioSequence::from_strings("d", 0, tokens.clone(), &["O", "O", "O", "O"]).unwrap();
        assert!(bio_to_spans(&all_o, &doc).unwrap().is_empty());

        let two = BioSequence::from_strings("d", 0, tokens[..2].to_vec(), &["B-SEC", "B-SEC"]).unwrap();
        let spans = bio_to_spans(&two, &doc).unwrap();
        assert_eq!(spans.iter().map(|s| s.range()).collect::<Vec<_>>(), vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn malformed_sequences_rejected() {
        let doc = Document::new("d", "a b");
        let tokens = tokenize(doc.text());
        assert!(matches!(
            BioSequence::from_strings("d", 0, tokens.clone(), &["I-SEC", "O"]),
            Err(Error::MalformedBio { index: 0, .. })
        ));
        assert!(BioSequence::from_strings("d", 0, tokens.clone(), &["B-SEC", "I-BODY"]).is_err());
        assert!(BioSequence::from_strings("d", 0, tokens.clone(), &["B-XYZ", "O"]).is_err());
        assert!(BioSequence::from_strings("d", 0, tokens, &["O"]).is_err());
    }

    #[test]
    fn out_of_document_span_is_error() {
        let doc = Document::new("d", "a b");
        let other = Document::new("d", "a much longer text");
        let span = SpanAnnotation::new(&other, 4, 10, Category::Sec, "a").unwrap();
        assert!(spans_to_bio(&doc, &tokenize(doc.text()), &[span]).is_err());
    }
}
