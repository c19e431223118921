//! Policy-driven redaction with an offset map for auditing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::category::Category;
use crate::error::{Error, Result};
use crate::model::{Document, SpanAnnotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    /// Delete the text.
    Suppress,
    /// Replace with `[CATEGORY]`.
    Placeholder,
    Keep,
}

impl Action {
    fn as_str(self) -> &'static str {
        match self {
            Action::Suppress => "SUPPRESS",
            Action::Placeholder => "PLACEHOLDER",
            Action::Keep => "KEEP",
        }
    }
}

/// Per-category actions plus a default for unlisted categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionPolicy {
    #[serde(default = "default_action")]
    pub default: Action,
    #[serde(default)]
    pub actions: BTreeMap<Category, Action>,
    /// Numbered placeholders (`[RELTIME-3]`). Off by default: numbering links
    /// mentions within a document.
    #[serde(default)]
    pub counters: bool,
}

fn default_action() -> Action {
    Action::Placeholder
}

impl Default for RedactionPolicy {
    fn default() -> Self {
        RedactionPolicy::uniform(Action::Placeholder)
    }
}

impl RedactionPolicy {
    pub fn uniform(action: Action) -> Self {
        RedactionPolicy {
            default: action,
            actions: BTreeMap::new(),
            counters: false,
        }
    }

    pub fn with(mut self, category: Category, action: Action) -> Self {
        self.actions.insert(category, action);
        self
    }

    pub fn action_for(&self, category: Category) -> Action {
        self.actions.get(&category).copied().unwrap_or(self.default)
    }

    /// SHA-256 over the fully resolved policy, so equivalent policies written
    /// differently share a fingerprint.
    pub fn fingerprint(&self) -> String {
        let mut canonical = String::new();
        for cat in Category::ALL {
            canonical.push_str(cat.as_str());
            canonical.push('=');
            canonical.push_str(self.action_for(cat).as_str());
            canonical.push(';');
        }
        canonical.push_str(if self.counters { "counters=1" } else { "counters=0" });
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "category", rename_all = "snake_case")]
pub enum SegmentKind {
    Kept,
    Placeholder(Category),
    Removed(Category),
}

/// One contiguous piece of the original text and where it went.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MapEntry {
    pub original: (usize, usize),
    /// `None` for removed text.
    pub output: Option<(usize, usize)>,
    #[serde(flatten)]
    pub kind: SegmentKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedactionResult {
    pub doc_id: String,
    pub text: String,
    pub offset_map: Vec<MapEntry>,
    /// Replaced regions per (winning) category.
    pub counts: BTreeMap<Category, usize>,
    pub policy_fingerprint: String,
}

impl RedactionResult {
    /// Output slice by char offsets.
    pub fn output_slice(&self, start: usize, end: usize) -> &str {
        let mut idx = self.text.char_indices().map(|(b, _)| b).chain(core::iter::once(self.text.len()));
        let b0 = idx.nth(start).unwrap_or(self.text.len());
        let b1 = if end > start {
            idx.nth(end - start - 1).unwrap_or(self.text.len())
        } else {
            b0
        };
        &self.text[b0..b1]
    }

    /// Replaced regions in output coordinates, as spans over the redacted
    /// text (placeholders only; removed text has no extent).
    pub fn remapped_spans(&self, redacted: &Document) -> Vec<SpanAnnotation> {
        self.offset_map
            .iter()
            .filter_map(|e| match (e.kind, e.output) {
                (SegmentKind::Placeholder(cat), Some((s, t))) if t > s => {
                    SpanAnnotation::new(redacted, s, t, cat, "redaction").ok()
                }
                _ => None,
            })
            .collect()
    }
}

struct Region {
    start: usize,
    end: usize,
    category: Category,
}

/// Applies `policy` to `spans` over `doc`.
///
/// Actionable spans (anything not `KEEP`) that overlap are unioned into one
/// region; the region takes the highest-priority category among its spans and
/// that category's action.
pub fn redact(doc: &Document, spans: &[SpanAnnotation], policy: &RedactionPolicy) -> Result<RedactionResult> {
    for span in spans {
        span.verify(doc)?;
    }
    let mut actionable: Vec<&SpanAnnotation> = spans
        .iter()
        .filter(|s| policy.action_for(s.category()) != Action::Keep)
        .collect();
    actionable.sort_by_key(|s| (s.start(), s.end()));

    let mut regions: Vec<Region> = Vec::new();
    for span in actionable {
        match regions.last_mut() {
            Some(r) if span.start() < r.end => {
                r.end = r.end.max(span.end());
                r.category = r.category.prevailing(span.category());
            }
            _ => regions.push(Region {
                start: span.start(),
                end: span.end(),
                category: span.category(),
            }),
        }
    }

    let mut text = String::with_capacity(doc.text().len());
    let mut out_len = 0usize;
    let mut offset_map = Vec::new();
    let mut counts: BTreeMap<Category, usize> = BTreeMap::new();
    let mut cursor = 0usize;
    let keep = |from: usize, to: usize, text: &mut String, out_len: &mut usize, map: &mut Vec<MapEntry>| {
        if to > from {
            text.push_str(doc.slice(from, to).unwrap_or_default());
            map.push(MapEntry {
                original: (from, to),
                output: Some((*out_len, *out_len + to - from)),
                kind: SegmentKind::Kept,
            });
            *out_len += to - from;
        }
    };
    for region in &regions {
        keep(cursor, region.start, &mut text, &mut out_len, &mut offset_map);
        let n = counts.entry(region.category).or_insert(0);
        *n += 1;
        match policy.action_for(region.category) {
            Action::Suppress => offset_map.push(MapEntry {
                original: (region.start, region.end),
                output: None,
                kind: SegmentKind::Removed(region.category),
            }),
            Action::Placeholder => {
                let label = if policy.counters {
                    format!("[{}-{}]", region.category, n)
                } else {
                    format!("[{}]", region.category)
                };
                let len = label.chars().count();
                text.push_str(&label);
                offset_map.push(MapEntry {
                    original: (region.start, region.end),
                    output: Some((out_len, out_len + len)),
                    kind: SegmentKind::Placeholder(region.category),
                });
                out_len += len;
            }
            Action::Keep => unreachable!("regions only hold actionable spans"),
        }
        cursor = region.end;
    }
    keep(cursor, doc.char_len(), &mut text, &mut out_len, &mut offset_map);

    Ok(RedactionResult {
        doc_id: doc.doc_id().to_string(),
        text,
        offset_map,
        counts,
        policy_fingerprint: policy.fingerprint(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Part of the span was carried into the output.
    NotCovered,
    /// The replacement at the mapped location still reads as the snippet.
    AtMappedLocation,
    /// Strict mode: the snippet occurs somewhere in the output.
    ElsewhereInOutput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub start: usize,
    pub end: usize,
    pub category: Category,
    pub snippet: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Verification {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Post-hoc check that every actionable span is gone from `result`.
///
/// Always checked: each span is fully covered by replaced map entries and the
/// replacement text is not the snippet itself. In `strict` mode the snippet
/// must not occur anywhere in the output (literal, case-sensitive), which is
/// noisy for short snippets.
pub fn verify_redaction(
    result: &RedactionResult,
    spans: &[SpanAnnotation],
    doc: &Document,
    policy: &RedactionPolicy,
    strict: bool,
) -> Result<Verification> {
    if result.doc_id != doc.doc_id() {
        return Err(Error::DocumentMismatch {
            left: result.doc_id.clone(),
            right: doc.doc_id().to_string(),
        });
    }
    let mut violations = Vec::new();
    for span in spans.iter().filter(|s| policy.action_for(s.category()) != Action::Keep) {
        let mut flag = |kind| {
            violations.push(Violation {
                start: span.start(),
                end: span.end(),
                category: span.category(),
                snippet: span.snippet().to_string(),
                kind,
            })
        };
        let covering: Vec<&MapEntry> = result
            .offset_map
            .iter()
            .filter(|e| e.original.0 < span.end() && span.start() < e.original.1)
            .collect();
        if covering.iter().any(|e| e.kind == SegmentKind::Kept) {
            flag(ViolationKind::NotCovered);
        } else if covering
            .iter()
            .filter_map(|e| e.output)
            .any(|(s, t)| result.output_slice(s, t) == span.snippet())
        {
            flag(ViolationKind::AtMappedLocation);
        }
        if strict && result.text.contains(span.snippet()) {
            flag(ViolationKind::ElsewhereInOutput);
        }
    }
    Ok(Verification {
        ok: violations.is_empty(),
        violations,
    })
}
