//! Core algorithms for indirect personal identifier (IPI) annotation work.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function over in-memory values: file formats, the review service and the
//! command line live in the `ipikit` crate.
//!
//! All offsets are Unicode scalar value indices into [`Document::text`],
//! half-open (`start..end`).

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agreement;
pub mod bio;
pub mod category;
pub mod consolidate;
pub mod error;
pub mod evaluation;
pub mod grounding;
pub mod model;
pub mod redaction;
pub mod rules;
pub mod section;
pub mod split;
pub mod stats;
pub mod tokenize;

pub use agreement::{pairwise_relaxed_f1, relaxed_match_count, AgreementReport, OverlapMode};
pub use bio::{bio_to_spans, spans_to_bio, BioLabel, BioSequence};
pub use category::Category;
pub use consolidate::{consolidate, AdjudicationDecision, Consolidation, DecisionKind};
pub use error::{Error, Result};
pub use evaluation::{classify_pair, evaluate, EvalReport, Outcome, Schema};
pub use grounding::{ground_extractions, EditBudget, GroundingReport, MatchTier};
pub use model::{
    merge_same_category, overlaps, token_overlap_count, AnnotationRecord, AnnotationSet, Corpus,
    Document, SpanAnnotation, Token,
};
pub use redaction::{redact, verify_redaction, Action, RedactionPolicy, RedactionResult};
pub use rules::RuleSet;
pub use section::{section_document, Section};
pub use split::{split_corpus, CorpusSplit};
pub use stats::{corpus_stats, CorpusStats};
pub use tokenize::tokenize;
