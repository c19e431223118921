//! Inter-annotator agreement as average pairwise relaxed F1.
//!
//! A span counts as matched when at least one span of the same label on the
//! other side overlaps it (by a shared token, or by a shared character in
//! [`OverlapMode::Character`]). This is set-cover matching, not one-to-one
//! assignment, so a long span may match several short ones.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::category::Category;
use crate::error::{Error, Result};
use crate::evaluation::f1_score;
use crate::model::{intervals_overlap, tokens_in, AnnotationSet, Corpus, SpanAnnotation, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMode {
    /// Spans must share at least one token.
    #[default]
    Token,
    /// Spans must share at least one character.
    Character,
}

/// Identical ranges always overlap, even when they cover no token.
pub(crate) fn spans_overlap(a: &SpanAnnotation, b: &SpanAnnotation, mode: OverlapMode, tokens: &[Token]) -> bool {
    if a.range() == b.range() {
        return true;
    }
    match mode {
        OverlapMode::Character => intervals_overlap(a.range(), b.range()),
        // A shared token counts even when the spans cover different parts of it.
        OverlapMode::Token => tokens_in(tokens, a.range())
            .iter()
            .any(|t| intervals_overlap((t.start, t.end), b.range())),
    }
}

/// `(matched_gold, matched_response)`: how many gold spans have a same-label
/// overlapping response span, and vice versa.
pub fn relaxed_match_count(
    gold: &[SpanAnnotation],
    response: &[SpanAnnotation],
    mode: OverlapMode,
    tokens: &[Token],
) -> (usize, usize) {
    let matches = |x: &SpanAnnotation, others: &[SpanAnnotation]| {
        others
            .iter()
            .any(|y| x.category() == y.category() && spans_overlap(x, y, mode, tokens))
    };
    let matched_gold = gold.iter().filter(|g| matches(g, response)).count();
    let matched_response = response.iter().filter(|r| matches(r, gold)).count();
    (matched_gold, matched_response)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AgreementCounts {
    pub spans_a: usize,
    pub spans_b: usize,
    /// Spans of A matched by B (recall direction with A as reference).
    pub matched_a: usize,
    /// Spans of B matched by A.
    pub matched_b: usize,
}

impl AgreementCounts {
    fn add(&mut self, other: AgreementCounts) {
        self.spans_a += other.spans_a;
        self.spans_b += other.spans_b;
        self.matched_a += other.matched_a;
        self.matched_b += other.matched_b;
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    /// F1 with A as reference and B as response.
    pub fn f1_a_as_gold(&self) -> f64 {
        let recall = Self::ratio(self.matched_a, self.spans_a);
        let precision = Self::ratio(self.matched_b, self.spans_b);
        f1_score(precision, recall)
    }

    /// F1 with B as reference and A as response.
    pub fn f1_b_as_gold(&self) -> f64 {
        let recall = Self::ratio(self.matched_b, self.spans_b);
        let precision = Self::ratio(self.matched_a, self.spans_a);
        f1_score(precision, recall)
    }

    /// Mean of both directed F1 values.
    pub fn f1(&self) -> f64 {
        (self.f1_a_as_gold() + self.f1_b_as_gold()) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryAgreement {
    pub category: Category,
    #[serde(flatten)]
    pub counts: AgreementCounts,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub source_a: String,
    pub source_b: String,
    pub mode: OverlapMode,
    /// Categories present in either set, in schema order.
    pub categories: Vec<CategoryAgreement>,
    pub micro: AgreementCounts,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

impl AgreementReport {
    pub fn category(&self, category: Category) -> Option<&CategoryAgreement> {
        self.categories.iter().find(|c| c.category == category)
    }
}

/// Agreement between two annotation sets over the same corpus. Counts are
/// pooled over documents before the micro ratio is taken.
pub fn pairwise_relaxed_f1(
    a: &AnnotationSet,
    b: &AnnotationSet,
    corpus: &Corpus,
    mode: OverlapMode,
) -> Result<AgreementReport> {
    let doc_ids: BTreeSet<&str> = a.doc_ids().chain(b.doc_ids()).collect();
    let mut per_cat = [AgreementCounts::default(); 9];
    for doc_id in doc_ids {
        let tokens = corpus
            .tokens(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
        let (sa, sb) = (a.spans(doc_id), b.spans(doc_id));
        for cat in Category::ALL {
            let ca: Vec<SpanAnnotation> = sa.iter().filter(|s| s.category() == cat).cloned().collect();
            let cb: Vec<SpanAnnotation> = sb.iter().filter(|s| s.category() == cat).cloned().collect();
            if ca.is_empty() && cb.is_empty() {
                continue;
            }
            let (matched_a, matched_b) = relaxed_match_count(&ca, &cb, mode, tokens);
            per_cat[cat.index()].add(AgreementCounts {
                spans_a: ca.len(),
                spans_b: cb.len(),
                matched_a,
                matched_b,
            });
        }
    }

    let mut micro = AgreementCounts::default();
    let mut categories = Vec::new();
    for cat in Category::ALL {
        let counts = per_cat[cat.index()];
        if counts.spans_a + counts.spans_b == 0 {
            continue;
        }
        micro.add(counts);
        categories.push(CategoryAgreement {
            category: cat,
            counts,
            f1: counts.f1(),
        });
    }
    let macro_f1 = if categories.is_empty() {
        0.0
    } else {
        categories.iter().map(|c| c.f1).sum::<f64>() / categories.len() as f64
    };
    Ok(AgreementReport {
        source_a: a.source().to_string(),
        source_b: b.source().to_string(),
        mode,
        categories,
        micro,
        micro_f1: micro.f1(),
        macro_f1,
    })
}
