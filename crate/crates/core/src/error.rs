use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("span {start}..{end} is empty or reversed")]
    EmptySpan { start: usize, end: usize },

    #[error("span {start}..{end} is out of bounds for document `{doc_id}` ({len} chars)")]
    OutOfBounds {
        doc_id: String,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("spans belong to different documents (`{left}` vs `{right}`)")]
    DocumentMismatch { left: String, right: String },

    #[error("snippet of span {start}..{end} in `{doc_id}` does not match the document text")]
    StaleSnippet {
        doc_id: String,
        start: usize,
        end: usize,
    },

    #[error("unknown document `{0}`")]
    UnknownDocument(String),

    #[error("duplicate document `{0}`")]
    DuplicateDocument(String),

    #[error("malformed BIO sequence for `{doc_id}` at token {index}: {reason}")]
    MalformedBio {
        doc_id: String,
        index: usize,
        reason: String,
    },

    #[error("cannot section `{doc_id}`: line {line} has {tokens} tokens, limit is {max_tokens}")]
    LineTooLong {
        doc_id: String,
        line: usize,
        tokens: usize,
        max_tokens: usize,
    },

    #[error(
        "cannot section `{doc_id}`: span {start}..{end} keeps {tokens} tokens together, limit is {max_tokens}"
    )]
    UnsplittableSpan {
        doc_id: String,
        start: usize,
        end: usize,
        tokens: usize,
        max_tokens: usize,
    },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("rule line {line}, column {column}: {message}")]
    Rule {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid decision: {0}")]
    InvalidDecision(String),
}
