//! Folding adjudication decisions over two annotators' spans into gold.
//!
//! Spans of both annotators are clustered into regions (connected components
//! of character overlap, any category). A region where both annotators
//! produced exactly the same spans is agreed and goes to gold as is. Every
//! other region needs a decision whose range covers it; the latest such
//! decision in log order wins. Regions without one are reported as undecided
//! and left out of gold.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::category::Category;
use crate::error::{Error, Result};
use crate::model::{merge_same_category, Document, SpanAnnotation};

pub const GOLD_SOURCE: &str = "gold";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Region {
    pub start: usize,
    pub end: usize,
}

impl Region {
    pub fn covers(&self, other: &Region) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecisionKind {
    AcceptA,
    AcceptB,
    Merged,
    RejectBoth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedSpan {
    pub start: usize,
    pub end: usize,
    pub label: Category,
}

/// One adjudicator's resolution of a region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationDecision {
    pub doc_id: String,
    pub region: Region,
    pub kind: DecisionKind,
    /// The custom span, required for `MERGED`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged: Option<MergedSpan>,
    pub adjudicator: String,
    #[serde(default)]
    pub timestamp: String,
    /// Versions of the annotator A / B spans the decision was based on.
    #[serde(default)]
    pub basis_a: Vec<u64>,
    #[serde(default)]
    pub basis_b: Vec<u64>,
    /// Document version the adjudicator saw; used for optimistic concurrency.
    pub basis_version: u64,
    /// Version assigned when the decision was recorded.
    #[serde(default)]
    pub version: u64,
}

impl AdjudicationDecision {
    pub fn validate(&self, doc: &Document) -> Result<()> {
        if self.doc_id != doc.doc_id() {
            return Err(Error::DocumentMismatch {
                left: self.doc_id.clone(),
                right: doc.doc_id().to_string(),
            });
        }
        doc.check_bounds(self.region.start, self.region.end)?;
        match (self.kind, &self.merged) {
            (DecisionKind::Merged, Some(m)) => doc.check_bounds(m.start, m.end),
            (DecisionKind::Merged, None) => Err(Error::InvalidDecision("MERGED needs a `merged` span".into())),
            (_, Some(_)) => Err(Error::InvalidDecision("only MERGED decisions carry a `merged` span".into())),
            (_, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Consolidation {
    pub gold: Vec<SpanAnnotation>,
    pub undecided: Vec<Region>,
}

struct Cluster {
    region: Region,
    a: Vec<(usize, usize, Category)>,
    b: Vec<(usize, usize, Category)>,
    spans_a: Vec<SpanAnnotation>,
    spans_b: Vec<SpanAnnotation>,
}

fn clusters(a: &[SpanAnnotation], b: &[SpanAnnotation]) -> Vec<Cluster> {
    let mut all: Vec<(bool, &SpanAnnotation)> = a
        .iter()
        .map(|s| (true, s))
        .chain(b.iter().map(|s| (false, s)))
        .collect();
    all.sort_by_key(|(from_a, s)| (s.start(), s.end(), s.category(), !*from_a));
    let mut out: Vec<Cluster> = Vec::new();
    for (from_a, span) in all {
        let joins = out.last().is_some_and(|c| span.start() < c.region.end);
        if !joins {
            out.push(Cluster {
                region: Region {
                    start: span.start(),
                    end: span.end(),
                },
                a: Vec::new(),
                b: Vec::new(),
                spans_a: Vec::new(),
                spans_b: Vec::new(),
            });
        }
        let c = out.last_mut().expect("cluster exists");
        c.region.end = c.region.end.max(span.end());
        if from_a {
            c.a.push(span.key());
            c.spans_a.push(span.clone());
        } else {
            c.b.push(span.key());
            c.spans_b.push(span.clone());
        }
    }
    for c in &mut out {
        c.a.sort_unstable();
        c.a.dedup();
        c.b.sort_unstable();
        c.b.dedup();
    }
    out
}

/// Deterministic fold of `decisions` (in log order) over one document.
pub fn consolidate(
    doc: &Document,
    a: &[SpanAnnotation],
    b: &[SpanAnnotation],
    decisions: &[AdjudicationDecision],
) -> Result<Consolidation> {
    for d in decisions {
        d.validate(doc)?;
    }
    let mut gold: Vec<SpanAnnotation> = Vec::new();
    let mut undecided = Vec::new();
    let mut merged_used = alloc::vec![false; decisions.len()];
    for cluster in clusters(a, b) {
        if cluster.a == cluster.b {
            gold.extend(cluster.spans_a);
            continue;
        }
        let winner = decisions
            .iter()
            .enumerate()
            .rev()
            .find(|(_, d)| d.region.covers(&cluster.region));
        let Some((idx, decision)) = winner else {
            undecided.push(cluster.region);
            continue;
        };
        match decision.kind {
            DecisionKind::AcceptA => gold.extend(cluster.spans_a),
            DecisionKind::AcceptB => gold.extend(cluster.spans_b),
            DecisionKind::RejectBoth => {}
            DecisionKind::Merged => {
                if !merged_used[idx] {
                    merged_used[idx] = true;
                    let m = decision.merged.as_ref().expect("validated");
                    gold.push(SpanAnnotation::new(doc, m.start, m.end, m.label, GOLD_SOURCE)?.with_version(decision.version));
                }
            }
        }
    }
    let gold = merge_same_category(gold.into_iter().map(|s| s.with_source(GOLD_SOURCE)).collect());
    Ok(Consolidation { gold, undecided })
}

pub fn region(start: usize, end: usize) -> Region {
    Region { start, end }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn doc() -> Document {
        Document::new("d", "Patient lives with his 28-year-old girlfriend in assisted living.")
    }

    fn s(a: usize, b: usize, c: Category, src: &str) -> SpanAnnotation {
        SpanAnnotation::new(&doc(), a, b, c, src).unwrap()
    }

    fn decision(start: usize, end: usize, kind: DecisionKind) -> AdjudicationDecision {
        AdjudicationDecision {
            doc_id: "d".into(),
            region: region(start, end),
            kind,
            merged: None,
            adjudicator: "adj".into(),
            timestamp: String::new(),
            basis_a: vec![],
            basis_b: vec![],
            basis_version: 0,
            version: 0,
        }
    }

    #[test]
    fn agreement_goes_straight_to_gold() {
        let a = [s(8, 45, Category::Family, "A")];
        let b = [s(8, 45, Category::Family, "B")];
        let c = consolidate(&doc(), &a, &b, &[]).unwrap();
        assert_eq!(c.gold.len(), 1);
        assert_eq!(c.gold[0].range(), (8, 45));
        assert_eq!(c.gold[0].source(), GOLD_SOURCE);
        assert!(c.undecided.is_empty());
    }

    #[test]
    fn disagreement_needs_decision() {
        let a = [s(8, 45, Category::Family, "A")];
        let b = [s(23, 34, Category::RelTime, "B")];
        let c = consolidate(&doc(), &a, &b, &[]).unwrap();
        assert!(c.gold.is_empty());
        assert_eq!(c.undecided, vec![region(8, 45)]);

        let c = consolidate(&doc(), &a, &b, &[decision(8, 45, DecisionKind::AcceptB)]).unwrap();
        assert_eq!(c.gold[0].category(), Category::RelTime);

        let later = [decision(8, 45, DecisionKind::AcceptB), decision(0, 65, DecisionKind::RejectBoth)];
        assert!(consolidate(&doc(), &a, &b, &later).unwrap().gold.is_empty());
    }

    #[test]
    fn merged_decision_adds_custom_span_once() {
        let a = [s(8, 22, Category::Family, "A"), s(49, 64, Category::Family, "A")];
        let b = [s(8, 45, Category::Family, "B")];
        let mut d = decision(0, 65, DecisionKind::Merged);
        d.merged = Some(MergedSpan {
            start: 8,
            end: 64,
            label: Category::Family,
        });
        let c = consolidate(&doc(), &a, &b, &[d]).unwrap();
        assert_eq!(c.gold.len(), 1);
        assert_eq!(c.gold[0].range(), (8, 64));
    }

    #[test]
    fn invalid_decisions_rejected() {
        let d = decision(0, 65, DecisionKind::Merged);
        assert!(d.validate(&doc()).is_err());
        let d = decision(10, 5, DecisionKind::AcceptA);
        assert!(d.validate(&doc()).is_err());
    }
}
