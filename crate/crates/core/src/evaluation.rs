//! Span-level NER scoring under the four SemEval-2013 task 9.1 schemas.
//!
//! Each document is aligned one-to-one: gold spans (in document order) first
//! claim an unclaimed prediction that is *correct* for them, then the
//! remaining gold spans claim their best remaining overlapping prediction
//! (incorrect before partial). Gold left over is missed, predictions left over
//! are spurious.
//!
//! Gold-side outcomes are attributed to the gold span's category and
//! prediction-side outcomes to the predicted category, so per category
//! `correct + incorrect + partial + missed == |gold|` and
//! `correct + incorrect + partial + spurious == |pred|` always hold.

use core::fmt;
use core::str::FromStr;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agreement::{spans_overlap, OverlapMode};
use crate::category::Category;
use crate::error::{Error, Result};
use crate::model::{AnnotationSet, Corpus, SpanAnnotation, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    /// Exact boundaries and same label.
    Strict,
    /// Exact boundaries, label ignored.
    Exact,
    /// Exact boundaries are correct, any other overlap is partial.
    Partial,
    /// Any overlap with the same label.
    #[default]
    Type,
}

impl Schema {
    pub const ALL: [Schema; 4] = [Schema::Strict, Schema::Exact, Schema::Partial, Schema::Type];

    pub fn as_str(self) -> &'static str {
        match self {
            Schema::Strict => "strict",
            Schema::Exact => "exact",
            Schema::Partial => "partial",
            Schema::Type => "type",
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Schema {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(Schema::Strict),
            "exact" => Ok(Schema::Exact),
            "partial" => Ok(Schema::Partial),
            "type" | "ent_type" => Ok(Schema::Type),
            other => Err(alloc::format!("unknown schema `{other}` (expected strict, exact, partial or type)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Correct,
    Incorrect,
    Partial,
}

/// `2PR / (P + R)`, or 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn outcome_for(gold: &SpanAnnotation, pred: &SpanAnnotation, schema: Schema) -> Outcome {
    let same_bounds = gold.range() == pred.range();
    let same_label = gold.category() == pred.category();
    match schema {
        Schema::Strict if same_bounds && same_label => Outcome::Correct,
        Schema::Strict => Outcome::Incorrect,
        Schema::Exact if same_bounds => Outcome::Correct,
        Schema::Exact => Outcome::Incorrect,
        Schema::Partial if same_bounds => Outcome::Correct,
        Schema::Partial => Outcome::Partial,
        Schema::Type if same_label => Outcome::Correct,
        Schema::Type => Outcome::Incorrect,
    }
}

/// Outcome of pairing `gold` with `pred`, or `None` when they do not overlap
/// (by at least one character).
pub fn classify_pair(gold: &SpanAnnotation, pred: &SpanAnnotation, schema: Schema) -> Result<Option<Outcome>> {
    if gold.doc_id() != pred.doc_id() {
        return Err(Error::DocumentMismatch {
            left: gold.doc_id().to_string(),
            right: pred.doc_id().to_string(),
        });
    }
    Ok(classify_in(gold, pred, schema, OverlapMode::Character, &[]))
}

/// [`classify_pair`] with an explicit overlap mode (token mode needs the
/// document's tokens).
pub fn classify_in(
    gold: &SpanAnnotation,
    pred: &SpanAnnotation,
    schema: Schema,
    mode: OverlapMode,
    tokens: &[Token],
) -> Option<Outcome> {
    if !spans_overlap(gold, pred, mode, tokens) {
        return None;
    }
    Some(outcome_for(gold, pred, schema))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alignment {
    /// `(gold index, prediction index, outcome)`.
    pub pairs: Vec<(usize, usize, Outcome)>,
    pub missed: Vec<usize>,
    pub spurious: Vec<usize>,
}

impl Alignment {
    pub fn correct(&self) -> usize {
        self.pairs.iter().filter(|p| p.2 == Outcome::Correct).count()
    }
}

fn doc_order(spans: &[SpanAnnotation]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by_key(|&i| (spans[i].start(), spans[i].end(), spans[i].category()));
    order
}

/// Aligns one document's gold and predicted spans. Both lists should be
/// normalized (see [`AnnotationSet`]); their order does not matter.
pub fn align(
    gold: &[SpanAnnotation],
    pred: &[SpanAnnotation],
    schema: Schema,
    mode: OverlapMode,
    tokens: &[Token],
) -> Alignment {
    let gold_order = doc_order(gold);
    let pred_order = doc_order(pred);
    let mut claimed = alloc::vec![false; pred.len()];
    let mut assigned: Vec<Option<(usize, Outcome)>> = alloc::vec![None; gold.len()];

    for &g in &gold_order {
        let hit = pred_order.iter().copied().find(|&p| {
            !claimed[p] && classify_in(&gold[g], &pred[p], schema, mode, tokens) == Some(Outcome::Correct)
        });
        if let Some(p) = hit {
            claimed[p] = true;
            assigned[g] = Some((p, Outcome::Correct));
        }
    }

    for &g in &gold_order {
        if assigned[g].is_some() {
            continue;
        }
        let best = pred_order
            .iter()
            .copied()
            .filter(|&p| !claimed[p])
            .filter_map(|p| classify_in(&gold[g], &pred[p], schema, mode, tokens).map(|o| (o, p)))
            .min_by_key(|&(o, _)| o);
        if let Some((o, p)) = best {
            claimed[p] = true;
            assigned[g] = Some((p, o));
        }
    }

    let mut alignment = Alignment::default();
    for &g in &gold_order {
        match assigned[g] {
            Some((p, o)) => alignment.pairs.push((g, p, o)),
            None => alignment.missed.push(g),
        }
    }
    alignment.spurious = pred_order.into_iter().filter(|&p| !claimed[p]).collect();
    alignment
}

/// Gold-side outcome counts (denominator of recall).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct GoldCounts {
    pub correct: usize,
    pub incorrect: usize,
    pub partial: usize,
    pub missed: usize,
}

impl GoldCounts {
    pub fn total(&self) -> usize {
        self.correct + self.incorrect + self.partial + self.missed
    }
    fn add(&mut self, o: &GoldCounts) {
        self.correct += o.correct;
        self.incorrect += o.incorrect;
        self.partial += o.partial;
        self.missed += o.missed;
    }
}

/// Prediction-side outcome counts (denominator of precision).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PredCounts {
    pub correct: usize,
    pub incorrect: usize,
    pub partial: usize,
    pub spurious: usize,
}

impl PredCounts {
    pub fn total(&self) -> usize {
        self.correct + self.incorrect + self.partial + self.spurious
    }
    fn add(&mut self, o: &PredCounts) {
        self.correct += o.correct;
        self.incorrect += o.incorrect;
        self.partial += o.partial;
        self.spurious += o.spurious;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    /// Precision `correct_weight / predicted`, recall `correct_weight / gold`.
    pub fn from_counts(correct_weight_pred: f64, predicted: usize, correct_weight_gold: f64, gold: usize) -> Scores {
        let precision = if predicted == 0 { 0.0 } else { correct_weight_pred / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { correct_weight_gold / gold as f64 };
        Scores {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }

    fn of(schema: Schema, gold: &GoldCounts, pred: &PredCounts) -> Scores {
        let half = if schema == Schema::Partial { 0.5 } else { 0.0 };
        Scores::from_counts(
            pred.correct as f64 + half * pred.partial as f64,
            pred.total(),
            gold.correct as f64 + half * gold.partial as f64,
            gold.total(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryScores {
    pub category: Category,
    pub gold: GoldCounts,
    pub pred: PredCounts,
    #[serde(flatten)]
    pub scores: Scores,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema: Schema,
    pub mode: OverlapMode,
    /// Categories with gold support or predictions, schema order.
    pub categories: Vec<CategoryScores>,
    pub micro_gold: GoldCounts,
    pub micro_pred: PredCounts,
    pub micro: Scores,
    /// Unweighted mean over `categories`.
    pub macro_avg: Scores,
    pub support: usize,
}

impl EvalReport {
    pub fn category(&self, category: Category) -> Option<&CategoryScores> {
        self.categories.iter().find(|c| c.category == category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub gold: [GoldCounts; 9],
    pub pred: [PredCounts; 9],
}

impl Tally {
    pub fn record(&mut self, gold: &[SpanAnnotation], pred: &[SpanAnnotation], alignment: &Alignment) {
        for &(g, p, o) in &alignment.pairs {
            let gc = &mut self.gold[gold[g].category().index()];
            let pc = &mut self.pred[pred[p].category().index()];
            match o {
                Outcome::Correct => {
                    gc.correct += 1;
                    pc.correct += 1;
                }
                Outcome::Incorrect => {
                    gc.incorrect += 1;
                    pc.incorrect += 1;
                }
                Outcome::Partial => {
                    gc.partial += 1;
                    pc.partial += 1;
                }
            }
        }
        for &g in &alignment.missed {
            self.gold[gold[g].category().index()].missed += 1;
        }
        for &p in &alignment.spurious {
            self.pred[pred[p].category().index()].spurious += 1;
        }
    }

    pub fn report(&self, schema: Schema, mode: OverlapMode) -> EvalReport {
        let mut categories = Vec::new();
        let mut micro_gold = GoldCounts::default();
        let mut micro_pred = PredCounts::default();
        for cat in Category::ALL {
            let (g, p) = (&self.gold[cat.index()], &self.pred[cat.index()]);
            micro_gold.add(g);
            micro_pred.add(p);
            if g.total() == 0 && p.total() == 0 {
                continue;
            }
            categories.push(CategoryScores {
                category: cat,
                gold: *g,
                pred: *p,
                scores: Scores::of(schema, g, p),
                support: g.total(),
            });
        }
        let n = categories.len() as f64;
        let macro_avg = if categories.is_empty() {
            Scores::default()
        } else {
            Scores {
                precision: categories.iter().map(|c| c.scores.precision).sum::<f64>() / n,
                recall: categories.iter().map(|c| c.scores.recall).sum::<f64>() / n,
                f1: categories.iter().map(|c| c.scores.f1).sum::<f64>() / n,
            }
        };
        EvalReport {
            schema,
            mode,
            categories,
            micro: Scores::of(schema, &micro_gold, &micro_pred),
            micro_gold,
            micro_pred,
            macro_avg,
            support: micro_gold.total(),
        }
    }
}

/// Scores `pred` against `gold` over `corpus`. Documents referenced by either
/// set must exist in the corpus.
pub fn evaluate(
    gold: &AnnotationSet,
    pred: &AnnotationSet,
    corpus: &Corpus,
    schema: Schema,
    mode: OverlapMode,
) -> Result<EvalReport> {
    let doc_ids: BTreeSet<&str> = gold.doc_ids().chain(pred.doc_ids()).collect();
    let mut tally = Tally::default();
    for doc_id in doc_ids {
        let tokens = corpus
            .tokens(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
        let (g, p) = (gold.spans(doc_id), pred.spans(doc_id));
        let alignment = align(g, p, schema, mode, tokens);
        tally.record(g, p, &alignment);
    }
    Ok(tally.report(schema, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Document;
    use alloc::vec;

    fn doc() -> Document {
        Document::new("d", "The patient's daughter serves as her health care proxy today.")
    }

    fn s(a: usize, b: usize, c: Category) -> SpanAnnotation {
        SpanAnnotation::new(&doc(), a, b, c, "x").unwrap()
    }

    #[test]
    fn classify_examples() {
        let g = s(5, 12, Category::Family);
        assert_eq!(classify_pair(&g, &s(5, 12, Category::Family), Schema::Type).unwrap(), Some(Outcome::Correct));
        assert_eq!(classify_pair(&g, &s(8, 20, Category::Family), Schema::Type).unwrap(), Some(Outcome::Correct));
        assert_eq!(classify_pair(&g, &s(8, 20, Category::RelTime), Schema::Type).unwrap(), Some(Outcome::Incorrect));
        assert_eq!(classify_pair(&g, &s(12, 20, Category::Family), Schema::Type).unwrap(), None);
    }

    #[test]
    fn classify_all_schemas() {
        let g = s(5, 12, Category::Family);
        let same = s(5, 12, Category::Family);
        let relabeled = s(5, 12, Category::Sec);
        let shifted = s(8, 20, Category::Family);
        let table = [
            (Schema::Strict, [Outcome::Correct, Outcome::Incorrect, Outcome::Incorrect]),
            (Schema::Exact, [Outcome::Correct, Outcome::Correct, Outcome::Incorrect]),
            (Schema::Partial, [Outcome::Correct, Outcome::Correct, Outcome::Partial]),
            (Schema::Type, [Outcome::Correct, Outcome::Incorrect, Outcome::Correct]),
        ];
        for (schema, expected) in table {
            for (pred, want) in [&same, &relabeled, &shifted].into_iter().zip(expected) {
                assert_eq!(classify_pair(&g, pred, schema).unwrap(), Some(want), "{schema}");
            }
        }
    }

    #[test]
    fn f1_arithmetic_matches_reported_rows() {
        assert!((f1_score(0.78, 0.93) - 0.85).abs() <= 0.005);
        assert!((f1_score(0.84, 0.97) - 0.90).abs() <= 0.005);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn two_gold_one_prediction() {
        let d = doc();
        let corpus = Corpus::new([d]).unwrap();
        let gold = AnnotationSet::from_spans("g", [s(4, 22, Category::Family), s(37, 54, Category::Sec)]);
        let pred = AnnotationSet::from_spans("p", [s(14, 22, Category::Family)]);
        let r = evaluate(&gold, &pred, &corpus, Schema::Type, OverlapMode::Character).unwrap();
        assert_eq!(r.micro.precision, 1.0);
        assert_eq!(r.micro.recall, 0.5);
        assert!((r.micro.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn correct_pairs_win_over_incorrect_claims() {
        // g1 (FAMILY) only touches p1 (RELTIME); g2 (RELTIME) matches p1.
        // Claiming p1 for g1 first would lose a correct match.
        let g = vec![s(0, 10, Category::Family), s(11, 20, Category::RelTime)];
        let p = vec![s(8, 15, Category::RelTime)];
        let a = align(&g, &p, Schema::Type, OverlapMode::Character, &[]);
        assert_eq!(a.correct(), 1);
        assert_eq!(a.missed, vec![0]);
    }

    #[test]
    fn unknown_document_is_error() {
        let corpus = Corpus::new([doc()]).unwrap();
        let other = Document::new("zzz", "elsewhere");
        let pred = AnnotationSet::from_spans(
            "p",
            [SpanAnnotation::new(&other, 0, 4, Category::Facility, "p").unwrap()],
        );
        let err = evaluate(&AnnotationSet::new("g"), &pred, &corpus, Schema::Type, OverlapMode::Character);
        assert_eq!(err.unwrap_err(), Error::UnknownDocument("zzz".into()));
    }

    #[test]
    fn predictions_without_support_score_zero() {
        let corpus = Corpus::new([doc()]).unwrap();
        let gold = AnnotationSet::from_spans("g", [s(4, 12, Category::Family)]);
        let pred = AnnotationSet::from_spans("p", [s(4, 12, Category::Family), s(40, 50, Category::Other)]);
        let r = evaluate(&gold, &pred, &corpus, Schema::Type, OverlapMode::Character).unwrap();
        assert_eq!(r.categories.len(), 2);
        assert_eq!(r.category(Category::Other).unwrap().scores.f1, 0.0);
        assert_eq!(r.macro_avg.f1, 0.5);
    }
}
