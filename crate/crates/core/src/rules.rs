//! Regex and gazetteer baseline tagger.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use regex_automata::meta::Regex;
use regex_automata::util::syntax;
use regex_automata::{Anchored, Input, MatchKind};

use crate::category::Category;
use crate::error::{Error, Result};
use crate::model::{sort_spans, Document, SpanAnnotation};

/// The rule file shipped with the crate.
pub const DEFAULT_RULES: &str = include_str!("../rules/default.rules");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Regex,
    Gazetteer,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub category: Category,
    pub kind: PatternKind,
    pub pattern: String,
    pub case_insensitive: bool,
    /// 1-based line in the rule file.
    pub line: usize,
    leftmost: Regex,
    longest: Regex,
}

impl Rule {
    pub fn new(category: Category, kind: PatternKind, pattern: &str, case_insensitive: bool) -> Result<Rule> {
        Rule::compile(category, kind, pattern, case_insensitive, 0, 0)
    }

    fn compile(
        category: Category,
        kind: PatternKind,
        pattern: &str,
        case_insensitive: bool,
        line: usize,
        column: usize,
    ) -> Result<Rule> {
        let source = match kind {
            PatternKind::Regex => pattern.to_owned(),
            PatternKind::Gazetteer => gazetteer_regex(pattern),
        };
        let build = |kind: MatchKind| {
            Regex::builder()
                .syntax(syntax::Config::new().case_insensitive(case_insensitive))
                .configure(Regex::config().match_kind(kind))
                .build(&source)
        };
        let wrap = |err: regex_automata::meta::BuildError| {
            let offset = err
                .syntax_error()
                .map(|e| match e {
                    regex_syntax::Error::Parse(p) => p.span().start.column,
                    regex_syntax::Error::Translate(t) => t.span().start.column,
                    _ => 1,
                })
                .unwrap_or(1);
            Error::Rule {
                line,
                column: column + offset.saturating_sub(1),
                message: format!("invalid pattern: {err}"),
            }
        };
        if kind == PatternKind::Gazetteer && pattern.trim().is_empty() {
            return Err(Error::Rule {
                line,
                column,
                message: "empty gazetteer phrase".into(),
            });
        }
        Ok(Rule {
            category,
            kind,
            pattern: pattern.to_owned(),
            case_insensitive,
            line,
            leftmost: build(MatchKind::LeftmostFirst).map_err(wrap)?,
            longest: build(MatchKind::All).map_err(wrap)?,
        })
    }

    /// Non-overlapping leftmost-longest matches as byte ranges.
    pub fn find_all(&self, text: &str) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut at = 0;
        while at <= text.len() {
            let Some(m) = self.leftmost.search(&Input::new(text).range(at..)) else {
                break;
            };
            let end = self
                .longest
                .search(&Input::new(text).range(m.start()..).anchored(Anchored::Yes))
                .map_or(m.end(), |l| l.end().max(m.end()));
            if end > m.start() {
                out.push((m.start(), end));
                at = end;
            } else {
                at = next_boundary(text, m.start());
            }
        }
        out
    }
}

fn next_boundary(text: &str, at: usize) -> usize {
    text[at..].chars().next().map_or(text.len() + 1, |c| at + c.len_utf8())
}

fn escape(ch: char, out: &mut String) {
    if "\\.+*?()|[]{}^$#&-~".contains(ch) {
        out.push('\\');
    }
    out.push(ch);
}

fn gazetteer_regex(phrase: &str) -> String {
    let phrase = phrase.trim();
    let mut out = String::new();
    let word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
    if word(phrase.chars().next()) {
        out.push_str(r"\b");
    }
    for (i, part) in phrase.split_whitespace().enumerate() {
        if i > 0 {
            out.push_str(r"\s+");
        }
        for ch in part.chars() {
            escape(ch, &mut out);
        }
    }
    if word(phrase.chars().last()) {
        out.push_str(r"\b");
    }
    out
}

/// An ordered, validated list of rules. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct RuleSet {
    name: String,
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(name: impl Into<String>, rules: Vec<Rule>) -> Self {
        RuleSet {
            name: name.into(),
            rules,
        }
    }

    /// The bundled default rules.
    pub fn default_rules() -> RuleSet {
        RuleSet::parse("default-rules", DEFAULT_RULES).expect("bundled rule file is valid")
    }

    /// Parses `CATEGORY<TAB>KIND<TAB>PATTERN[<TAB>FLAGS]` lines. Blank lines
    /// and lines starting with `#` are skipped. Any bad line aborts the load.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<RuleSet> {
        let mut rules = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let err = |column: usize, message: String| Error::Rule {
                line: line_no,
                column,
                message,
            };
            if !(3..=4).contains(&fields.len()) {
                return Err(err(
                    1,
                    format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
                ));
            }
            let category: Category = fields[0]
                .parse()
                .map_err(|_| err(1, format!("unknown category `{}`", fields[0])))?;
            let kind_col = fields[0].chars().count() + 2;
            let kind = match fields[1].trim().to_ascii_lowercase().as_str() {
                "regex" | "re" => PatternKind::Regex,
                "gazetteer" | "phrase" => PatternKind::Gazetteer,
                other => return Err(err(kind_col, format!("unknown pattern kind `{other}`"))),
            };
            let pattern_col = kind_col + fields[1].chars().count() + 1;
            let mut case_insensitive = false;
            if let Some(flags) = fields.get(3) {
                let flag_col = pattern_col + fields[2].chars().count() + 1;
                for flag in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
                    match flag {
                        "i" | "ci" | "nocase" => case_insensitive = true,
                        "cs" | "case" => case_insensitive = false,
                        other => return Err(err(flag_col, format!("unknown flag `{other}`"))),
                    }
                }
            }
            rules.push(Rule::compile(category, kind, fields[2], case_insensitive, line_no, pattern_col)?);
        }
        Ok(RuleSet {
            name: name.into(),
            rules,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Tags one document. Each rule contributes its own non-overlapping
    /// leftmost-longest matches; matches of different rules may overlap.
    /// Output is sorted and exact duplicates are removed.
    pub fn tag(&self, doc: &Document) -> Vec<SpanAnnotation> {
        let mut spans = Vec::new();
        for rule in &self.rules {
            for (b0, b1) in rule.find_all(doc.text()) {
                let (Some(start), Some(end)) = (doc.char_offset(b0), doc.char_offset(b1)) else {
                    continue;
                };
                if let Ok(span) = SpanAnnotation::new(doc, start, end, rule.category, self.name.to_string()) {
                    spans.push(span);
                }
            }
        }
        sort_spans(&mut spans);
        spans.dedup_by_key(|s| s.key());
        spans
    }
}

pub fn rule_tag(doc: &Document, rules: &RuleSet) -> Vec<SpanAnnotation> {
    rules.tag(doc)
}
