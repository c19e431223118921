//! The `ipikit` command line. Machine-readable output goes to stdout (or
//! `--output`), diagnostics to stderr.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ipikit_core::bio::section_to_bio;
use ipikit_core::{
    corpus_stats, evaluate, ground_extractions, pairwise_relaxed_f1, redact, section_document, split_corpus,
    verify_redaction, AnnotationRecord, Category, CorpusStats, EditBudget, GroundingReport, OverlapMode,
    RedactionPolicy, RuleSet, Schema,
};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{self, RedactedRecord};
use crate::report;
use crate::service::{self, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "ipikit", version, about = "Indirect personal identifier annotation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Annotation counts and proportions per category.
    Stats {
        annotations: PathBuf,
        /// Bind against these documents first, so overlapping same-category
        /// spans are merged before counting.
        #[arg(long)]
        docs: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Seeded train/dev/test split manifest.
    Split {
        docs: PathBuf,
        #[arg(long, default_value = "0.6,0.15,0.25", value_delimiter = ',')]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// CoNLL BIO export, sectioned at line breaks.
    Bio {
        docs: PathBuf,
        annotations: PathBuf,
        #[arg(long, default_value_t = 512)]
        max_tokens: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Pairwise relaxed F1 between two annotators.
    Iaa {
        annotations_a: PathBuf,
        annotations_b: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Token)]
        mode: ModeArg,
        #[arg(long)]
        json: bool,
    },
    /// Scores predictions against gold.
    Eval {
        gold: PathBuf,
        predictions: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long, default_value = "type")]
        schema: Schema,
        #[arg(long, value_enum, default_value_t = ModeArg::Character)]
        mode: ModeArg,
        #[arg(long)]
        json: bool,
    },
    /// Rule-based tagging; writes predictions JSONL.
    Tag {
        docs: PathBuf,
        /// Rule file; the bundled rules when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Grounds extracted snippets to document offsets.
    Ground {
        docs: PathBuf,
        extractions: PathBuf,
        /// Fixed fuzzy budget; by default 2 edits per 20 snippet characters.
        #[arg(long)]
        max_edit_distance: Option<usize>,
        #[arg(long, default_value = "llm")]
        source: String,
        /// Write the grounding report here as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Applies a redaction policy to curated spans.
    Redact {
        docs: PathBuf,
        annotations: PathBuf,
        /// TOML or JSON policy; placeholders for everything when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Also fail when a snippet reappears anywhere in the output.
        #[arg(long)]
        strict: bool,
        /// Write the audit report here as JSON.
        #[arg(long)]
        audit: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Runs the review service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Token,
    Character,
}

impl From<ModeArg> for OverlapMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Token => OverlapMode::Token,
            ModeArg::Character => OverlapMode::Character,
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write to this file instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl Output {
    fn write(&self, stdout: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        match &self.output {
            Some(path) => {
                let file = File::create(path).map_err(|e| Error::io(path, e))?;
                let mut w = BufWriter::new(file);
                body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
            }
            None => body(stdout).map_err(|e| Error::io(Path::new("<stdout>"), e)),
        }
    }
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    writeln!(out, "{text}").map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn print_text(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Stats { annotations, docs, json } => {
            let stats = match docs {
                Some(docs) => {
                    let corpus = io::load_corpus(&docs)?;
                    corpus_stats(&io::load_annotations(&annotations, &corpus)?)
                }
                None => CorpusStats::from_categories(io::load_records(&annotations)?.into_iter().map(|(_, r)| r.label)),
            };
            if json {
                print_json(stdout, &stats)?;
            } else {
                print_text(stdout, &report::stats_table(&stats))?;
            }
        }
        Command::Split {
            docs,
            ratios,
            seed,
            output,
        } => {
            let corpus = io::load_corpus(&docs)?;
            let ids: Vec<&str> = corpus.doc_ids().collect();
            let ratios: [f64; 3] = ratios
                .try_into()
                .map_err(|_| Error::Usage("--ratios takes exactly three values".into()))?;
            let split = split_corpus(&ids, ratios, seed)?;
            output.write(stdout, |w| writeln!(w, "{}", io::split_manifest(&split)))?;
        }
        Command::Bio {
            docs,
            annotations,
            max_tokens,
            output,
        } => {
            let corpus = io::load_corpus(&docs)?;
            let set = io::load_annotations(&annotations, &corpus)?;
            let mut sequences = Vec::new();
            for doc in corpus.documents() {
                let tokens = corpus.tokens(doc.doc_id()).unwrap_or(&[]);
                let spans = set.spans(doc.doc_id());
                for section in section_document(doc, tokens, max_tokens, spans)? {
                    sequences.push(section_to_bio(doc, tokens, &section, spans)?);
                }
            }
            output.write(stdout, |w| io::write_conll(w, &sequences))?;
        }
        Command::Iaa {
            annotations_a,
            annotations_b,
            docs,
            mode,
            json,
        } => {
            let corpus = io::load_corpus(&docs)?;
            let a = io::load_annotations(&annotations_a, &corpus)?;
            let b = io::load_annotations(&annotations_b, &corpus)?;
            let report = pairwise_relaxed_f1(&a, &b, &corpus, mode.into())?;
            if json {
                print_json(stdout, &report)?;
            } else {
                print_text(stdout, &report::iaa_table(&report))?;
            }
        }
        Command::Eval {
            gold,
            predictions,
            docs,
            schema,
            mode,
            json,
        } => {
            let corpus = io::load_corpus(&docs)?;
            let gold = io::load_annotations(&gold, &corpus)?;
            let pred = io::load_annotations(&predictions, &corpus)?;
            let report = evaluate(&gold, &pred, &corpus, schema, mode.into())?;
            if json {
                print_json(stdout, &report)?;
            } else {
                print_text(stdout, &report::eval_table(&report))?;
            }
        }
        Command::Tag { docs, rules, output } => {
            let corpus = io::load_corpus(&docs)?;
            let rules = match rules {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    let name = path
                        .file_stem()
                        .map_or_else(|| "rules".to_string(), |s| s.to_string_lossy().into_owned());
                    RuleSet::parse(name, &text).map_err(|source| Error::Data {
                        location: crate::error::Location::file(&path),
                        source,
                    })?
                }
                None => RuleSet::default_rules(),
            };
            let records: Vec<AnnotationRecord> = corpus
                .documents()
                .flat_map(|doc| rules.tag(doc))
                .map(|s| AnnotationRecord::from(&s))
                .collect();
            output.write(stdout, |w| io::write_jsonl(w, &records))?;
        }
        Command::Ground {
            docs,
            extractions,
            max_edit_distance,
            source,
            report: report_path,
            json,
            output,
        } => {
            let corpus = io::load_corpus(&docs)?;
            let records = io::load_extractions(&extractions, &corpus)?;
            let budget = max_edit_distance.map_or_else(EditBudget::default, EditBudget::Fixed);
            let mut per_doc = Vec::new();
            for doc in corpus.documents() {
                let snippets: Vec<(Category, &str)> = records
                    .iter()
                    .filter(|r| r.doc_id == doc.doc_id())
                    .flat_map(|r| r.snippets.iter().map(move |s| (r.label, s.as_str())))
                    .collect();
                if !snippets.is_empty() {
                    per_doc.push(ground_extractions(doc, &snippets, budget, &source));
                }
            }
            let grounding = GroundingReport::from_documents(per_doc);
            let predictions: Vec<AnnotationRecord> = grounding
                .documents
                .iter()
                .flat_map(|d| &d.grounded)
                .map(|g| AnnotationRecord::from(&g.span))
                .collect();
            output.write(stdout, |w| io::write_jsonl(w, &predictions))?;
            if let Some(path) = report_path {
                let body = serde_json::to_vec_pretty(&grounding).expect("report serializes");
                std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            }
            if json {
                let _ = writeln!(stderr, "{}", serde_json::to_string(&grounding).expect("report serializes"));
            } else {
                let _ = stderr.write_all(report::grounding_summary(&grounding).as_bytes());
            }
        }
        Command::Redact {
            docs,
            annotations,
            policy,
            strict,
            audit,
            output,
        } => {
            let corpus = io::load_corpus(&docs)?;
            let set = io::load_annotations(&annotations, &corpus)?;
            let policy = match policy {
                Some(path) => io::load_policy(&path)?,
                None => RedactionPolicy::default(),
            };
            let mut redacted = Vec::new();
            let mut audits = Vec::new();
            let mut failures = 0;
            for doc in corpus.documents() {
                let spans = set.spans(doc.doc_id());
                let result = redact(doc, spans, &policy)?;
                let verification = verify_redaction(&result, spans, doc, &policy, strict)?;
                for v in &verification.violations {
                    failures += 1;
                    let _ = writeln!(
                        stderr,
                        "violation: {} {}..{} {} {:?}: {:?}",
                        doc.doc_id(),
                        v.start,
                        v.end,
                        v.category.as_str(),
                        v.snippet,
                        v.kind
                    );
                }
                redacted.push(RedactedRecord {
                    doc_id: result.doc_id.clone(),
                    text: result.text.clone(),
                    policy_fingerprint: result.policy_fingerprint.clone(),
                });
                audits.push(serde_json::json!({ "result": result, "verification": verification }));
            }
            output.write(stdout, |w| io::write_jsonl(w, &redacted))?;
            if let Some(path) = audit {
                let body = serde_json::json!({
                    "policy": policy,
                    "policy_fingerprint": policy.fingerprint(),
                    "strict": strict,
                    "documents": audits,
                });
                let text = serde_json::to_vec_pretty(&body).expect("audit serializes");
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            }
            if failures > 0 {
                let _ = writeln!(stderr, "error: {failures} redaction violation(s)");
                return Ok(1);
            }
        }
        Command::Serve { config } => {
            let config = ServiceConfig::load(config.as_deref())?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Usage(format!("tokio runtime: {e}")))?;
            runtime.block_on(service::serve(config))?;
        }
    }
    Ok(0)
}
