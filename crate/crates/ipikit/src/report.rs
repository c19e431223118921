//! Aligned plain-text tables for the reporting commands.

use std::fmt::Write;

use ipikit_core::{AgreementReport, CorpusStats, EvalReport, GroundingReport, MatchTier};

/// Category, count and percentage rows followed by the total.
pub fn stats_table(stats: &CorpusStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>8} {:>10}", "Category", "Count", "Proportion");
    for row in &stats.rows {
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>9.2}%",
            row.category.as_str(),
            row.count,
            row.proportion * 100.0
        );
    }
    let _ = writeln!(out, "{:<10} {:>8}", "TOTAL", stats.total);
    if stats.empty {
        let _ = writeln!(out, "(no annotations: proportions undefined)");
    }
    out
}

pub fn eval_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema: {}", report.schema);
    let _ = writeln!(
        out,
        "{:<14} {:>9} {:>9} {:>9} {:>8}",
        "Category", "Precision", "Recall", "F1", "Support"
    );
    for row in &report.categories {
        let _ = writeln!(
            out,
            "{:<14} {:>9.2} {:>9.2} {:>9.2} {:>8}",
            row.category.as_str(),
            row.scores.precision,
            row.scores.recall,
            row.scores.f1,
            row.support
        );
    }
    for (name, s) in [("micro average", report.micro), ("macro average", report.macro_avg)] {
        let _ = writeln!(
            out,
            "{:<14} {:>9.2} {:>9.2} {:>9.2} {:>8}",
            name, s.precision, s.recall, s.f1, report.support
        );
    }
    out
}

pub fn iaa_table(report: &AgreementReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} vs {}", report.source_a, report.source_b);
    let _ = writeln!(out, "{:<14} {:>7} {:>7} {:>7}", "Category", "A", "B", "F1");
    for row in &report.categories {
        let _ = writeln!(
            out,
            "{:<14} {:>7} {:>7} {:>7.2}",
            row.category.as_str(),
            row.counts.spans_a,
            row.counts.spans_b,
            row.f1
        );
    }
    let _ = writeln!(
        out,
        "{:<14} {:>7} {:>7} {:>7.2}",
        "micro average", report.micro.spans_a, report.micro.spans_b, report.micro_f1
    );
    let _ = writeln!(out, "{:<14} {:>7} {:>7} {:>7.2}", "macro average", "", "", report.macro_f1);
    out
}

pub fn grounding_summary(report: &GroundingReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "snippets: {}", report.total);
    for tier in [MatchTier::Exact, MatchTier::CaseInsensitive, MatchTier::Fuzzy] {
        let _ = writeln!(out, "  {:<17} {}", format!("{tier:?}"), report.tier_count(tier));
    }
    let _ = writeln!(out, "  rejected          {}", report.rejected);
    let _ = writeln!(out, "hallucination rate: {:.4}", report.hallucination_rate);
    for rejection in report.documents.iter().flat_map(|d| &d.rejected) {
        let _ = writeln!(
            out,
            "  rejected {} {} {:?}: {}",
            rejection.doc_id,
            rejection.category.as_str(),
            rejection.snippet,
            rejection.reason.as_str()
        );
    }
    out
}
