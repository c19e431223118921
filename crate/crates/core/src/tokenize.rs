//! Model-agnostic tokenizer: maximal runs of letters/digits form one token,
//! every other non-whitespace char is a token of its own.

use alloc::string::String;
use alloc::vec::Vec;

use crate::model::Token;

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut run: Option<(usize, String)> = None;
    for (pos, ch) in text.chars().enumerate() {
        if ch.is_alphanumeric() {
            match &mut run {
                Some((_, buf)) => buf.push(ch),
                None => run = Some((pos, String::from(ch))),
            }
            continue;
        }
        if let Some((start, buf)) = run.take() {
            tokens.push(Token {
                end: start + buf.chars().count(),
                text: buf,
                start,
            });
        }
        if !ch.is_whitespace() {
            tokens.push(Token {
                text: String::from(ch),
                start: pos,
                end: pos + 1,
            });
        }
    }
    if let Some((start, buf)) = run {
        tokens.push(Token {
            end: start + buf.chars().count(),
            text: buf,
            start,
        });
    }
    tokens
}
