//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line shows up in
//! `cargo test` output. Exits non-zero if any criterion fails.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use ipikit::service::{router, AppState, LogEntry, Store};
use ipikit_core::evaluation::align;
use ipikit_core::{
    bio_to_spans, corpus_stats, evaluate, ground_extractions, merge_same_category, pairwise_relaxed_f1, redact,
    section_document, spans_to_bio, split_corpus, tokenize, verify_redaction, Action, AnnotationSet, BioLabel,
    Category, Corpus, Document, EditBudget, GroundingReport, MatchTier, OverlapMode, RedactionPolicy, Schema,
    SpanAnnotation, Token,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria = [
        Criterion {
            name: "metric arithmetic consistency",
            limit: Some(Duration::from_secs(1)),
            run: metric_arithmetic,
        },
        Criterion {
            name: "per-category statistics",
            limit: Some(Duration::from_secs(1)),
            run: category_statistics,
        },
        Criterion {
            name: "split arithmetic",
            limit: None,
            run: split_arithmetic,
        },
        Criterion {
            name: "evaluation oracle equivalence",
            limit: Some(Duration::from_secs(60)),
            run: evaluation_oracle,
        },
        Criterion {
            name: "agreement properties",
            limit: None,
            run: agreement_properties,
        },
        Criterion {
            name: "BIO round trip",
            limit: None,
            run: bio_round_trip,
        },
        Criterion {
            name: "sectioning safety",
            limit: None,
            run: sectioning_safety,
        },
        Criterion {
            name: "grounding",
            limit: None,
            run: grounding,
        },
        Criterion {
            name: "redaction safety",
            limit: None,
            run: redaction_safety,
        },
        Criterion {
            name: "service determinism and stale decisions",
            limit: None,
            run: service_determinism,
        },
    ];

    let mut failed = 0;
    for c in &criteria {
        let started = Instant::now();
        let mut outcome = (c.run)();
        let elapsed = started.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, c.limit) {
            if elapsed > limit {
                outcome = Err(format!("took {elapsed:?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("PASS  {:<42} {:>9.3}s  {detail}", c.name, elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<42} {:>9.3}s  {why}", c.name, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- helpers

const WORDS: &[&str] = &[
    "patient", "lives", "with", "his", "wife", "in", "ICU", "day", "3", "12:20", "café", "naïve", "Zürich", "-", ",",
    ".", "(", ")", "works", "as", "a", "carpenter", "28-year-old", "POD", "once", "week",
];

fn random_text(rng: &mut ChaCha8Rng, max_words: usize) -> String {
    let n = rng.random_range(0..=max_words);
    let mut text = String::new();
    for i in 0..n {
        if i > 0 {
            text.push_str(match rng.random_range(0..10) {
                0 => "\n",
                1 => "  ",
                2 => "",
                _ => " ",
            });
        }
        text.push_str(WORDS[rng.random_range(0..WORDS.len())]);
    }
    text
}

fn random_category(rng: &mut ChaCha8Rng) -> Category {
    Category::ALL[rng.random_range(0..Category::ALL.len())]
}

fn random_span(rng: &mut ChaCha8Rng, doc: &Document, source: &str) -> Option<SpanAnnotation> {
    let len = doc.char_len();
    if len == 0 {
        return None;
    }
    let start = rng.random_range(0..len);
    let end = rng.random_range(start + 1..=len.min(start + 12));
    SpanAnnotation::new(doc, start, end, random_category(rng), source).ok()
}

fn random_spans(rng: &mut ChaCha8Rng, doc: &Document, max: usize, source: &str) -> Vec<SpanAnnotation> {
    let n = rng.random_range(0..=max);
    (0..n).filter_map(|_| random_span(rng, doc, source)).collect()
}

fn span(doc: &Document, start: usize, end: usize, cat: Category, source: &str) -> SpanAnnotation {
    SpanAnnotation::new(doc, start, end, cat, source).expect("valid test span")
}

/// A document of `n` one-token words "w000 w001 ...", each 4 chars plus a space.
fn word_doc(id: &str, n: usize) -> Document {
    let text: Vec<String> = (0..n).map(|i| format!("w{i:03}")).collect();
    Document::new(id, text.join(" "))
}

fn word_span(doc: &Document, i: usize, cat: Category, source: &str) -> SpanAnnotation {
    span(doc, i * 5, i * 5 + 4, cat, source)
}

// ------------------------------------------------------------ criteria

/// Builds gold/prediction sets with `correct` matching spans, and enough
/// missed and spurious spans to reach the requested totals, then scores them.
fn scored_f1(correct: usize, predicted: usize, gold_total: usize, cat: Category) -> Result<(f64, f64, f64), String> {
    const PER_DOC: usize = 20;
    let mut docs = Vec::new();
    let (mut gold, mut pred) = (Vec::new(), Vec::new());
    let slots = correct + (gold_total - correct) + (predicted - correct);
    for slot in 0..slots {
        if slot % PER_DOC == 0 {
            docs.push(word_doc(&format!("d{:05}", slot / PER_DOC), PER_DOC));
        }
        let doc = docs.last().expect("document exists");
        let i = slot % PER_DOC;
        if slot < correct {
            gold.push(word_span(doc, i, cat, "gold"));
            pred.push(word_span(doc, i, cat, "pred"));
        } else if slot < gold_total {
            gold.push(word_span(doc, i, cat, "gold"));
        } else {
            pred.push(word_span(doc, i, cat, "pred"));
        }
    }
    let corpus = Corpus::new(docs).map_err(|e| e.to_string())?;
    let report = evaluate(
        &AnnotationSet::from_spans("gold", gold),
        &AnnotationSet::from_spans("pred", pred),
        &corpus,
        Schema::Type,
        OverlapMode::Character,
    )
    .map_err(|e| e.to_string())?;
    let row = report.category(cat).ok_or("category row missing")?;
    ensure(row.scores == report.micro, || "single-category row differs from micro".into())?;
    Ok((report.micro.precision, report.micro.recall, report.micro.f1))
}

fn metric_arithmetic() -> Outcome {
    // 1209/1550 = 0.78 and 1209/1300 = 0.93; 2037/2425 = 0.84 and 2037/2100 = 0.97.
    let mut details = Vec::new();
    for (correct, predicted, gold, p, r, f1, cat) in [
        (1209, 1550, 1300, 0.78, 0.93, 0.85, Category::Family),
        (2037, 2425, 2100, 0.84, 0.97, 0.90, Category::RelTime),
    ] {
        let (sp, sr, sf) = scored_f1(correct, predicted, gold, cat)?;
        ensure((sp - p).abs() < 1e-12 && (sr - r).abs() < 1e-12, || {
            format!("counts gave P={sp} R={sr}, wanted {p}/{r}")
        })?;
        ensure((sf - f1).abs() <= 0.005, || format!("F1 {sf:.4} not within 0.005 of {f1}"))?;
        details.push(format!("P={p} R={r} -> F1={sf:.4}"));
    }
    Ok(details.join("; "))
}

fn category_statistics() -> Outcome {
    // Table order of the published counts.
    let table = [
        (Category::Family, 273, 4.40),
        (Category::Body, 132, 2.13),
        (Category::Details, 99, 1.60),
        (Category::Sec, 59, 0.95),
        (Category::Facility, 1421, 22.92),
        (Category::RelTime, 4006, 64.62),
        (Category::Lifestyle, 144, 2.32),
        (Category::PhiRef, 32, 0.52),
        (Category::Other, 33, 0.53),
    ];
    let mut lines = String::new();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("annotations.jsonl");
    let mut spans = Vec::new();
    let doc = word_doc("synthetic", 4006);
    for (cat, count, _) in table {
        for i in 0..count {
            let s = word_span(&doc, i, cat, "gold");
            lines.push_str(&serde_json::to_string(&ipikit_core::AnnotationRecord::from(&s)).unwrap());
            lines.push('\n');
            spans.push(s);
        }
    }
    std::fs::write(&path, lines).map_err(|e| e.to_string())?;

    let stats = corpus_stats(&AnnotationSet::from_spans("gold", spans));
    ensure(stats.total == 6199, || format!("total {}", stats.total))?;
    for (cat, count, percent) in table {
        ensure(stats.count(cat) == count, || format!("{cat} count {}", stats.count(cat)))?;
        let got = stats.percent(cat);
        ensure((got - percent).abs() <= 0.01, || format!("{cat}: {got:.4}% vs {percent}%"))?;
    }
    let sum: f64 = stats.rows.iter().map(|r| r.proportion).sum();
    ensure((sum - 1.0).abs() < 1e-9, || format!("proportions sum to {sum}"))?;

    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = ipikit::cli::run(["ipikit", "stats", path.to_str().unwrap()], &mut out, &mut err);
    ensure(code == 0, || String::from_utf8_lossy(&err).into_owned())?;
    let out = String::from_utf8_lossy(&out);
    let family_row = out.lines().find(|l| l.starts_with("FAMILY")).unwrap_or_default();
    ensure(family_row.split_whitespace().collect::<Vec<_>>() == ["FAMILY", "273", "4.40%"], || {
        format!("CLI row: {family_row:?}")
    })?;
    Ok("total 6199, all nine proportions within 0.01 points".into())
}

fn split_arithmetic() -> Outcome {
    let ids: Vec<String> = (0..100).map(|i| format!("doc-{i:03}")).collect();
    let first = split_corpus(&ids, [0.60, 0.15, 0.25], 13).map_err(|e| e.to_string())?;
    ensure(first.sizes() == (60, 15, 25), || format!("sizes {:?}", first.sizes()))?;
    let all: Vec<&String> = first.train.iter().chain(&first.dev).chain(&first.test).collect();
    let unique: BTreeSet<&String> = all.iter().copied().collect();
    ensure(all.len() == 100 && unique.len() == 100, || "partitions overlap".into())?;
    ensure(unique.into_iter().eq(ids.iter()), || "partitions do not cover the corpus".into())?;
    for _ in 0..5 {
        let again = split_corpus(&ids, [0.60, 0.15, 0.25], 13).map_err(|e| e.to_string())?;
        ensure(again == first, || "same seed gave a different split".into())?;
    }
    Ok("60/15/25, disjoint, covering, stable across 5 reruns".into())
}

/// Independent pair classification: `None` when the spans share no character.
fn oracle_outcome(g: &SpanAnnotation, p: &SpanAnnotation, schema: Schema) -> Option<u8> {
    const CORRECT: u8 = 0;
    const INCORRECT: u8 = 1;
    const PARTIAL: u8 = 2;
    if g.start().max(p.start()) >= g.end().min(p.end()) {
        return None;
    }
    let bounds = g.range() == p.range();
    let label = g.category() == p.category();
    Some(match schema {
        Schema::Strict => {
            if bounds && label {
                CORRECT
            } else {
                INCORRECT
            }
        }
        Schema::Exact => {
            if bounds {
                CORRECT
            } else {
                INCORRECT
            }
        }
        Schema::Partial => {
            if bounds {
                CORRECT
            } else {
                PARTIAL
            }
        }
        Schema::Type => {
            if label {
                CORRECT
            } else {
                INCORRECT
            }
        }
    })
}

/// Maximum number of correct pairs over all one-to-one alignments.
fn brute_force_correct(gold: &[SpanAnnotation], pred: &[SpanAnnotation], schema: Schema) -> usize {
    fn go(
        i: usize,
        used: u32,
        gold: &[SpanAnnotation],
        pred: &[SpanAnnotation],
        schema: Schema,
        memo: &mut HashMap<(usize, u32), usize>,
    ) -> usize {
        if i == gold.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, used)) {
            return v;
        }
        let mut best = go(i + 1, used, gold, pred, schema, memo);
        for (j, p) in pred.iter().enumerate() {
            if used & (1 << j) == 0 && oracle_outcome(&gold[i], p, schema) == Some(0) {
                best = best.max(1 + go(i + 1, used | (1 << j), gold, pred, schema, memo));
            }
        }
        memo.insert((i, used), best);
        best
    }
    go(0, 0, gold, pred, schema, &mut HashMap::new())
}

fn evaluation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for n in 0..1000 {
        let doc = Document::new(format!("e{n}"), random_text(&mut rng, 24));
        let tokens = tokenize(doc.text());
        let gold = merge_same_category(random_spans(&mut rng, &doc, 8, "gold"));
        let pred = merge_same_category(random_spans(&mut rng, &doc, 8, "pred"));
        for schema in [Schema::Strict, Schema::Exact, Schema::Partial, Schema::Type] {
            let greedy = align(&gold, &pred, schema, OverlapMode::Character, &tokens);
            let optimum = brute_force_correct(&gold, &pred, schema);
            ensure(greedy.correct() == optimum, || {
                format!("doc {n} {schema}: greedy {} vs optimum {optimum}", greedy.correct())
            })?;
            for &(g, p, o) in &greedy.pairs {
                ensure(oracle_outcome(&gold[g], &pred[p], schema) == Some(o as u8), || {
                    format!("doc {n} {schema}: pair ({g},{p}) classified {o:?}")
                })?;
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} document/schema cases match the brute-force optimum"))
}

fn agreement_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Identical non-empty sets.
    let docs: Vec<Document> = (0..10)
        .map(|i| Document::new(format!("a{i}"), random_text(&mut rng, 40)))
        .collect();
    let spans: Vec<SpanAnnotation> = docs
        .iter()
        .flat_map(|d| {
            let mut out = random_spans(&mut rng, d, 6, "x");
            out.extend(random_span(&mut rng, d, "x"));
            out
        })
        .collect();
    ensure(!spans.is_empty(), || "generator produced no spans".into())?;
    let corpus = Corpus::new(docs.clone()).map_err(|e| e.to_string())?;
    let a = AnnotationSet::from_spans("A", spans.clone());
    let b = AnnotationSet::from_spans("B", spans.into_iter().map(|s| s.with_source("B")));
    for mode in [OverlapMode::Token, OverlapMode::Character] {
        let r = pairwise_relaxed_f1(&a, &b, &corpus, mode).map_err(|e| e.to_string())?;
        ensure(r.micro_f1 == 1.0 && r.macro_f1 == 1.0 && r.categories.iter().all(|c| c.f1 == 1.0), || {
            format!("identical sets scored {} / {}", r.micro_f1, r.macro_f1)
        })?;
    }

    // Symmetry.
    for n in 0..500 {
        let docs: Vec<Document> = (0..3)
            .map(|i| Document::new(format!("s{n}-{i}"), random_text(&mut rng, 30)))
            .collect();
        let corpus = Corpus::new(docs.clone()).map_err(|e| e.to_string())?;
        let a = AnnotationSet::from_spans("A", docs.iter().flat_map(|d| random_spans(&mut rng, d, 6, "A")));
        let b = AnnotationSet::from_spans("B", docs.iter().flat_map(|d| random_spans(&mut rng, d, 6, "B")));
        let mode = if n % 2 == 0 { OverlapMode::Token } else { OverlapMode::Character };
        let ab = pairwise_relaxed_f1(&a, &b, &corpus, mode).map_err(|e| e.to_string())?;
        let ba = pairwise_relaxed_f1(&b, &a, &corpus, mode).map_err(|e| e.to_string())?;
        let per_cat = |r: &ipikit_core::AgreementReport| r.categories.iter().map(|c| (c.category, c.f1)).collect::<Vec<_>>();
        ensure(
            ab.micro_f1 == ba.micro_f1 && ab.macro_f1 == ba.macro_f1 && per_cat(&ab) == per_cat(&ba),
            || format!("pair {n}: {} vs {}", ab.micro_f1, ba.micro_f1),
        )?;
    }

    // Four spans each, one label disagreement: 3/4 matched both ways.
    let doc = Document::new(
        "toy",
        "A 33-year-old carpenter lives with his wife and plays basketball on weekends.",
    );
    let corpus = Corpus::new([doc.clone()]).map_err(|e| e.to_string())?;
    let layout = [
        (2, 13, Category::RelTime, Category::RelTime),
        (14, 23, Category::Sec, Category::Sec),
        (24, 43, Category::Family, Category::Family),
        (48, 64, Category::Lifestyle, Category::Other),
    ];
    let a = AnnotationSet::from_spans("A", layout.iter().map(|&(s, e, c, _)| span(&doc, s, e, c, "A")));
    let b = AnnotationSet::from_spans("B", layout.iter().map(|&(s, e, _, c)| span(&doc, s, e, c, "B")));
    let r = pairwise_relaxed_f1(&a, &b, &corpus, OverlapMode::Token).map_err(|e| e.to_string())?;
    ensure((r.micro_f1 - 0.75).abs() < 1e-12, || format!("toy micro F1 {}", r.micro_f1))?;
    Ok("identical sets 1.0, 500 pairs symmetric, toy case 0.75".into())
}

/// Token index ranges overlapped by `range`.
fn snapped(tokens: &[Token], range: (usize, usize)) -> Option<(usize, usize)> {
    let hit: Vec<usize> = (0..tokens.len())
        .filter(|&i| tokens[i].start < range.1 && range.0 < tokens[i].end)
        .collect();
    Some((*hit.first()?, *hit.last()? + 1))
}

fn bio_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut compared = 0;
    for n in 0..1000 {
        let doc = Document::new(format!("b{n}"), random_text(&mut rng, 30));
        let tokens = tokenize(doc.text());
        let arbitrary = n % 2 == 1;
        let spans = if arbitrary {
            random_spans(&mut rng, &doc, 6, "x")
        } else {
            // Spans whose token coverage is pairwise disjoint, with ragged
            // character edges inside or before/after their boundary tokens.
            let mut out = Vec::new();
            let mut next = 0;
            while next < tokens.len() && out.len() < 6 {
                let lo = rng.random_range(next..tokens.len());
                let hi = rng.random_range(lo..tokens.len().min(lo + 4));
                let start_min = if lo == 0 { 0 } else { tokens[lo - 1].end };
                let start = rng.random_range(start_min..tokens[lo].end);
                let end_max = tokens.get(hi + 1).map_or(doc.char_len(), |t| t.start);
                let end = rng.random_range(tokens[hi].start + 1..=end_max).max(start + 1);
                if snapped(&tokens, (start, end)) == Some((lo, hi + 1)) {
                    out.push(span(&doc, start, end, random_category(&mut rng), "x"));
                }
                next = hi + 2;
            }
            out
        };
        let seq = spans_to_bio(&doc, &tokens, &merge_same_category(spans.clone())).map_err(|e| e.to_string())?;
        let labels = seq.labels();
        for (i, label) in labels.iter().enumerate() {
            if let BioLabel::Inside(cat) = label {
                let ok = i > 0 && labels[i - 1].category() == Some(*cat);
                ensure(ok, || format!("instance {n}: I-{cat} without B at token {i}"))?;
            }
        }
        if arbitrary {
            continue;
        }
        let decoded: Vec<(usize, usize, Category)> = bio_to_spans(&seq, &doc)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|s| s.key())
            .collect();
        let mut expected: Vec<(usize, usize, Category)> = spans
            .iter()
            .filter_map(|s| {
                let (lo, hi) = snapped(&tokens, s.range())?;
                Some((tokens[lo].start, tokens[hi - 1].end, s.category()))
            })
            .collect();
        expected.sort();
        ensure(decoded == expected, || format!("instance {n}: {decoded:?} vs {expected:?}"))?;
        compared += 1;
    }
    Ok(format!("{compared} exact round trips, 1000 sequences free of I-without-B"))
}

/// Minimum section count over all newline boundary placements, or `None` if
/// no placement respects the budget and the spans.
fn brute_force_sections(doc: &Document, tokens: &[Token], max: usize, spans: &[SpanAnnotation]) -> Option<usize> {
    let len = doc.char_len();
    let mut cuts: Vec<usize> = vec![0];
    cuts.extend(
        doc.text()
            .chars()
            .enumerate()
            .filter(|&(i, c)| c == '\n' && i + 1 < len)
            .map(|(i, _)| i + 1),
    );
    cuts.push(len);
    cuts.dedup();
    let count = |a: usize, b: usize| tokens.iter().filter(|t| t.start >= a && t.start < b).count();
    let legal = |p: usize| spans.iter().all(|s| !(s.start() < p && p < s.end()));
    // best[j]: fewest sections covering text up to cuts[j].
    let mut best: Vec<Option<usize>> = vec![None; cuts.len()];
    best[0] = Some(0);
    for j in 1..cuts.len() {
        if j + 1 < cuts.len() && !legal(cuts[j]) {
            continue;
        }
        for i in 0..j {
            if let Some(b) = best[i] {
                if count(cuts[i], cuts[j]) <= max {
                    best[j] = Some(best[j].map_or(b + 1, |x: usize| x.min(b + 1)));
                }
            }
        }
    }
    if len == 0 {
        return Some(1);
    }
    best[cuts.len() - 1]
}

fn sectioning_safety() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut sectioned, mut refused) = (0, 0);
    for n in 0..1000 {
        let doc = Document::new(format!("s{n}"), random_text(&mut rng, 60));
        let tokens = tokenize(doc.text());
        let spans = merge_same_category(random_spans(&mut rng, &doc, 5, "x"));
        let longest_line = doc
            .text()
            .split('\n')
            .map(|l| tokenize(l).len())
            .max()
            .unwrap_or(0);
        let max = longest_line.max(1) + rng.random_range(0..8);
        let oracle = brute_force_sections(&doc, &tokens, max, &spans);
        match section_document(&doc, &tokens, max, &spans) {
            Ok(sections) => {
                let text: String = sections.iter().map(|s| doc.slice(s.start, s.end).unwrap()).collect();
                ensure(text == doc.text(), || format!("doc {n}: sections do not rebuild the text"))?;
                for (i, s) in sections.iter().enumerate() {
                    ensure(s.section_index == i && s.token_count <= max, || {
                        format!("doc {n}: section {i} has {} tokens, max {max}", s.token_count)
                    })?;
                    let real = tokens.iter().filter(|t| t.start >= s.start && t.end <= s.end).count();
                    ensure(real == s.token_count, || format!("doc {n}: token_count {} vs {real}", s.token_count))?;
                }
                for sp in &spans {
                    let homes = sections.iter().filter(|s| s.contains(sp)).count();
                    ensure(homes == 1, || format!("doc {n}: span {:?} in {homes} sections", sp.range()))?;
                }
                ensure(oracle == Some(sections.len()), || {
                    format!("doc {n}: {} sections, oracle {oracle:?}", sections.len())
                })?;
                sectioned += 1;
            }
            Err(ipikit_core::Error::UnsplittableSpan { .. }) => {
                ensure(oracle.is_none(), || format!("doc {n}: refused but oracle found {oracle:?}"))?;
                refused += 1;
            }
            Err(e) => return Err(format!("doc {n}: {e}")),
        }
    }
    Ok(format!(
        "{sectioned} documents sectioned optimally, {refused} correctly refused"
    ))
}

fn grounding() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let filler = ["the", "patient", "was", "seen", "on", "ward", "and", "discharged", "home", "stable"];
    let mut per_doc = Vec::new();
    let mut planted_total = 0;
    let mut expected: HashMap<(String, (usize, usize)), String> = HashMap::new();
    for d in 0..20 {
        let mut text = String::new();
        let mut snippets: Vec<(Category, String)> = Vec::new();
        let plants = if d < 10 { 3 } else { 2 };
        for p in 0..plants {
            for _ in 0..rng.random_range(3..9) {
                text.push_str(filler[rng.random_range(0..filler.len())]);
                text.push(' ');
            }
            let phrase = format!("mercy west unit{planted_total:03}");
            let start = text.chars().count();
            text.push_str(&phrase);
            text.push_str(". ");
            // Half of the extractions come back in a different case.
            let query = if p % 2 == 0 { phrase.clone() } else { phrase.to_uppercase() };
            expected.insert((format!("g{d:02}"), (start, start + phrase.chars().count())), query.clone());
            snippets.push((Category::Facility, query));
            planted_total += 1;
        }
        if d % 2 == 0 {
            snippets.push((Category::RelTime, format!("{:010}", 4_096_773_122u64 + d as u64)));
        }
        let doc = Document::new(format!("g{d:02}"), text);
        per_doc.push(ground_extractions(&doc, &snippets, EditBudget::default(), "llm"));
    }
    let report = GroundingReport::from_documents(per_doc);
    ensure(planted_total == 50 && report.total == 60, || {
        format!("planted {planted_total}, total {}", report.total)
    })?;
    for g in report.documents.iter().flat_map(|d| &d.grounded) {
        ensure(matches!(g.tier, MatchTier::Exact | MatchTier::CaseInsensitive), || {
            format!("{:?} grounded by {:?}", g.span.snippet(), g.tier)
        })?;
        let query = expected
            .get(&(g.span.doc_id().to_string(), g.span.range()))
            .ok_or_else(|| format!("unexpected offsets {:?}", g.span.range()))?;
        ensure(query.eq_ignore_ascii_case(g.span.snippet()), || format!("{query} grounded to {:?}", g.span.snippet()))?;
    }
    ensure(report.grounded == 50 && report.rejected == 10, || {
        format!("grounded {}, rejected {}", report.grounded, report.rejected)
    })?;
    ensure(report.hallucination_rate == 10.0 / 60.0, || format!("rate {}", report.hallucination_rate))?;
    Ok(format!(
        "50 grounded ({} exact, {} case-insensitive), 10 rejected, rate 10/60",
        report.tier_count(MatchTier::Exact),
        report.tier_count(MatchTier::CaseInsensitive)
    ))
}

fn redaction_safety() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let actions = [Action::Suppress, Action::Placeholder, Action::Keep];
    for n in 0..1000 {
        let doc = Document::new(format!("r{n}"), random_text(&mut rng, 30));
        let spans = random_spans(&mut rng, &doc, 6, "gold");
        let mut policy = RedactionPolicy::uniform(actions[rng.random_range(0..3)]);
        for cat in Category::ALL {
            if rng.random_bool(0.5) {
                policy = policy.with(cat, actions[rng.random_range(0..3)]);
            }
        }
        policy.counters = rng.random_bool(0.3);
        let result = redact(&doc, &spans, &policy).map_err(|e| e.to_string())?;
        let check = verify_redaction(&result, &spans, &doc, &policy, false).map_err(|e| e.to_string())?;
        ensure(check.ok, || format!("triple {n}: {:?}", check.violations))?;

        // Length accounting over the offset map.
        let removed: usize = result
            .offset_map
            .iter()
            .filter(|e| !matches!(e.kind, ipikit_core::redaction::SegmentKind::Kept))
            .map(|e| e.original.1 - e.original.0)
            .sum();
        let inserted: usize = result
            .offset_map
            .iter()
            .filter(|e| matches!(e.kind, ipikit_core::redaction::SegmentKind::Placeholder(_)))
            .filter_map(|e| e.output.map(|(s, t)| t - s))
            .sum();
        ensure(result.text.chars().count() == doc.char_len() - removed + inserted, || {
            format!("triple {n}: length accounting broken")
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 0..200 {
        let doc = Document::new(format!("k{n}"), random_text(&mut rng, 30));
        let spans = random_spans(&mut rng, &doc, 6, "gold");
        let result = redact(&doc, &spans, &RedactionPolicy::uniform(Action::Keep)).map_err(|e| e.to_string())?;
        ensure(result.text.as_bytes() == doc.text().as_bytes(), || format!("KEEP changed doc {n}"))?;
    }

    let doc = Document::new("fig", "He works as a carpenter.");
    let sec = span(&doc, 3, 23, Category::Sec, "gold");
    let result = redact(&doc, &[sec], &RedactionPolicy::uniform(Action::Placeholder)).map_err(|e| e.to_string())?;
    ensure(result.text == "He [SEC].", || format!("got {:?}", result.text))?;
    Ok("1000 random triples verified, KEEP is identity, \"He [SEC].\"".into())
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut builder = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            builder = builder.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let response = app.clone().oneshot(builder.body(body).unwrap()).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

fn service_corpus() -> Corpus {
    Corpus::new([
        Document::new("d1", "Patient is a 33-year-old male, admitted at 12:20 after a motor vehicle accident."),
        Document::new("d2", "He lives with his 28-year-old girlfriend in assisted living."),
    ])
    .unwrap()
}

fn service_determinism() -> Outcome {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let store = Store::open(service_corpus(), "annotator_a", "annotator_b", dir.path(), 3).map_err(|e| e.to_string())?;
        let app = router(AppState::new(store, None), None).map_err(|e| e.to_string())?;

        let writes = [
            ("d1", json!({"start": 13, "end": 24, "label": "RELTIME", "source": "annotator_a"})),
            ("d1", json!({"start": 13, "end": 24, "label": "RELTIME", "source": "annotator_b"})),
            ("d1", json!({"start": 44, "end": 49, "label": "RELTIME", "source": "annotator_a"})),
            ("d2", json!({"start": 3, "end": 40, "label": "FAMILY", "source": "annotator_a"})),
            ("d2", json!({"start": 18, "end": 29, "label": "RELTIME", "source": "annotator_b"})),
        ];
        for (doc, body) in writes {
            let (status, bytes) = call(&app, "POST", &format!("/docs/{doc}/annotations"), Some(body)).await;
            ensure(status == StatusCode::CREATED, || format!("annotation: {status} {}", String::from_utf8_lossy(&bytes)))?;
        }
        let decision = |basis: u64| {
            json!({"region": {"start": 3, "end": 40}, "kind": "ACCEPT_A", "adjudicator": "adj1",
                   "timestamp": "2024-01-01T00:00:00Z", "basis_a": [1], "basis_b": [2], "basis_version": basis})
        };
        let (status, _) = call(&app, "POST", "/docs/d2/decisions", Some(decision(2))).await;
        ensure(status == StatusCode::CREATED, || format!("first decision: {status}"))?;
        // A second adjudicator still looking at version 2.
        let (status, _) = call(&app, "POST", "/docs/d2/decisions", Some(decision(2))).await;
        ensure(status == StatusCode::CONFLICT, || format!("stale decision got {status}, not 409"))?;

        let (status, live) = call(&app, "GET", "/export/gold", None).await;
        ensure(status == StatusCode::OK, || format!("export: {status}"))?;

        let log = std::fs::read_to_string(dir.path().join("log.jsonl")).map_err(|e| e.to_string())?;
        let entries: Vec<LogEntry> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        let mut exports = Vec::new();
        for _ in 0..2 {
            let replayed = Store::replay(service_corpus(), "annotator_a", "annotator_b", entries.clone())
                .map_err(|e| e.to_string())?;
            let app = router(AppState::new(replayed, None), None).map_err(|e| e.to_string())?;
            exports.push(call(&app, "GET", "/export/gold", None).await.1);
        }
        drop(app);
        let reopened = Store::open(service_corpus(), "annotator_a", "annotator_b", dir.path(), 3).map_err(|e| e.to_string())?;
        let app = router(AppState::new(reopened, None), None).map_err(|e| e.to_string())?;
        exports.push(call(&app, "GET", "/export/gold", None).await.1);
        ensure(exports.iter().all(|e| *e == live), || "replayed export differs".into())?;

        let gold: Value = serde_json::from_slice(&live).map_err(|e| e.to_string())?;
        ensure(gold["annotations"].as_array().map_or(0, Vec::len) == 2, || format!("gold {gold}"))?;
        ensure(gold["undecided"].as_array().map_or(0, Vec::len) == 1, || format!("gold {gold}"))?;
        Ok(format!("{} log entries replay to identical export; stale basis gives 409", entries.len()))
    })
}
