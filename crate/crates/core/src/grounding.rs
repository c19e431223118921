//! Grounding free-text extractions (e.g. LLM output) to source offsets.
//!
//! Each snippet goes through a tier cascade: exact substring, then
//! case-insensitive substring, then the closest fuzzy window within an edit
//! budget. The first tier that finds anything wins, and within a tier the
//! earliest offset wins. Snippets that resolve nowhere are rejected; the
//! rejection rate is reported as the hallucination rate.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::category::Category;
use crate::model::{Document, SpanAnnotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchTier {
    Exact,
    CaseInsensitive,
    Fuzzy,
}

/// Maximum edit distance allowed for the fuzzy tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditBudget {
    Fixed(usize),
    /// `allowed` edits per `per_chars` snippet chars, rounded down.
    Proportional { allowed: usize, per_chars: usize },
}

impl Default for EditBudget {
    fn default() -> Self {
        EditBudget::Proportional {
            allowed: 2,
            per_chars: 20,
        }
    }
}

impl EditBudget {
    /// Budget for a snippet of `len` chars, capped below `len` so that a
    /// window can never be entirely made of edits.
    pub fn for_len(self, len: usize) -> usize {
        let raw = match self {
            EditBudget::Fixed(n) => n,
            EditBudget::Proportional { allowed, per_chars } => len * allowed / per_chars.max(1),
        };
        raw.min(len.saturating_sub(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NotFound,
    EmptySnippet,
    UnknownDocument,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NotFound => "not found",
            RejectReason::EmptySnippet => "empty snippet",
            RejectReason::UnknownDocument => "unknown document",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundedSpan {
    pub span: SpanAnnotation,
    pub tier: MatchTier,
    /// Edit distance of the window (0 for the substring tiers).
    pub distance: usize,
    /// Start offsets of further matches in the same tier.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ambiguous: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub doc_id: String,
    pub category: Category,
    pub snippet: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DocumentGrounding {
    pub doc_id: String,
    pub grounded: Vec<GroundedSpan>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct GroundingReport {
    pub documents: Vec<DocumentGrounding>,
    pub total: usize,
    pub grounded: usize,
    pub rejected: usize,
    pub hallucination_rate: f64,
}

impl GroundingReport {
    pub fn from_documents(documents: Vec<DocumentGrounding>) -> Self {
        let grounded: usize = documents.iter().map(|d| d.grounded.len()).sum();
        let rejected: usize = documents.iter().map(|d| d.rejected.len()).sum();
        let total = grounded + rejected;
        GroundingReport {
            documents,
            total,
            grounded,
            rejected,
            hallucination_rate: if total == 0 { 0.0 } else { rejected as f64 / total as f64 },
        }
    }

    pub fn tier_count(&self, tier: MatchTier) -> usize {
        self.documents
            .iter()
            .flat_map(|d| &d.grounded)
            .filter(|g| g.tier == tier)
            .count()
    }
}

fn chars_eq_ci(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

fn find_all(text: &[char], pattern: &[char], eq: impl Fn(char, char) -> bool) -> Vec<usize> {
    if pattern.is_empty() || pattern.len() > text.len() {
        return Vec::new();
    }
    (0..=text.len() - pattern.len())
        .filter(|&i| text[i..i + pattern.len()].iter().zip(pattern).all(|(a, b)| eq(*a, *b)))
        .collect()
}

/// Levenshtein distance over chars, comparing case-insensitively.
pub fn edit_distance(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(!chars_eq_ci(ca, cb));
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Best approximate occurrence of `pattern` in `text`: lowest edit distance,
/// then earliest start, then shortest window. Returns `(start, end, distance)`.
pub fn best_fuzzy_window(text: &[char], pattern: &[char], max_distance: usize) -> Option<(usize, usize, usize)> {
    let m = pattern.len();
    if m == 0 || text.is_empty() {
        return None;
    }
    // Semi-global alignment: free start in the text. Each cell carries the
    // (distance, start) of its best alignment; ties prefer the earlier start.
    let n = text.len();
    let mut prev: Vec<(usize, usize)> = (0..=n).map(|j| (0, j)).collect();
    let mut cur = alloc::vec![(0usize, 0usize); n + 1];
    for (i, &pc) in pattern.iter().enumerate() {
        cur[0] = (i + 1, 0);
        for j in 1..=n {
            let diag = (prev[j - 1].0 + usize::from(!chars_eq_ci(pc, text[j - 1])), prev[j - 1].1);
            let up = (prev[j].0 + 1, prev[j].1);
            let left = (cur[j - 1].0 + 1, cur[j - 1].1);
            cur[j] = diag.min(up).min(left);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    let mut best: Option<(usize, usize, usize)> = None;
    for (end, &(dist, start)) in prev.iter().enumerate() {
        if dist > max_distance || end <= start {
            continue;
        }
        let key = (dist, start, end - start);
        if best.is_none_or(|(bs, be, bd)| key < (bd, bs, be - bs)) {
            best = Some((start, end, dist));
        }
    }
    best
}

/// Grounds `(category, snippet)` pairs against one document.
pub fn ground_extractions<S: AsRef<str>>(
    doc: &Document,
    snippets: &[(Category, S)],
    budget: EditBudget,
    source: &str,
) -> DocumentGrounding {
    let text: Vec<char> = doc.text().chars().collect();
    let mut out = DocumentGrounding {
        doc_id: doc.doc_id().to_string(),
        ..Default::default()
    };
    for (category, snippet) in snippets {
        let snippet = snippet.as_ref();
        let reject = |reason| Rejection {
            doc_id: doc.doc_id().to_string(),
            category: *category,
            snippet: snippet.to_string(),
            reason,
        };
        if snippet.is_empty() {
            out.rejected.push(reject(RejectReason::EmptySnippet));
            continue;
        }
        let pattern: Vec<char> = snippet.chars().collect();
        let resolved = resolve(&text, &pattern, budget);
        match resolved {
            Some((tier, start, end, distance, ambiguous)) => {
                let span = SpanAnnotation::new(doc, start, end, *category, source)
                    .expect("grounded window lies inside the document");
                out.grounded.push(GroundedSpan {
                    span,
                    tier,
                    distance,
                    ambiguous,
                });
            }
            None => out.rejected.push(reject(RejectReason::NotFound)),
        }
    }
    out
}

type Resolved = (MatchTier, usize, usize, usize, Vec<usize>);

fn resolve(text: &[char], pattern: &[char], budget: EditBudget) -> Option<Resolved> {
    let m = pattern.len();
    let exact = find_all(text, pattern, |a, b| a == b);
    if let Some((&first, rest)) = exact.split_first() {
        return Some((MatchTier::Exact, first, first + m, 0, rest.to_vec()));
    }
    let ci = find_all(text, pattern, chars_eq_ci);
    if let Some((&first, rest)) = ci.split_first() {
        return Some((MatchTier::CaseInsensitive, first, first + m, 0, rest.to_vec()));
    }
    let max = budget.for_len(m);
    if max == 0 {
        return None;
    }
    let (start, end, _) = best_fuzzy_window(text, pattern, max)?;
    let distance = edit_distance(&text[start..end], pattern);
    (distance <= max).then(|| (MatchTier::Fuzzy, start, end, distance, Vec::new()))
}

/// Does `window` match `snippet` under the rules of `tier`?
pub fn tier_accepts(tier: MatchTier, window: &str, snippet: &str, max_distance: usize) -> bool {
    match tier {
        MatchTier::Exact => window == snippet,
        MatchTier::CaseInsensitive => {
            window.chars().count() == snippet.chars().count()
                && window.chars().zip(snippet.chars()).all(|(a, b)| chars_eq_ci(a, b))
        }
        MatchTier::Fuzzy => {
            let w: Vec<char> = window.chars().collect();
            let s: Vec<char> = snippet.chars().collect();
            edit_distance(&w, &s) <= max_distance
        }
    }
}
