//! Whitespace tokenization with character offsets, and naive sentence
//! splitting. Offsets throughout the crate count Unicode scalar values, not
//! bytes, so they survive JSON round-trips of non-ASCII text.

/// A whitespace token with its [start, end) char offsets in the source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Split on whitespace, recording char offsets.
pub fn tokenize(s: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    for (i, ch) in s.chars().enumerate() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(Token {
                    text: std::mem::take(&mut current),
                    start,
                    end: i,
                });
            }
        } else {
            if current.is_empty() {
                start = i;
            }
            current.push(ch);
        }
    }
    if !current.is_empty() {
        let end = s.chars().count();
        tokens.push(Token {
            text: current,
            start,
            end,
        });
    }
    tokens
}

/// Lowercased whitespace tokens (the metric-side tokenizer).
pub fn lower_tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(|w| w.to_lowercase()).collect()
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Substring by char offsets, [start, end).
pub fn char_substring(s: &str, start: usize, end: usize) -> String {
    s.chars().skip(start).take(end.saturating_sub(start)).collect()
}

/// Indices of tokens whose char range overlaps [start, end).
pub fn tokens_overlapping(tokens: &[Token], start: usize, end: usize) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.start < end && start < t.end)
        .map(|(i, _)| i)
        .collect()
}

/// Naive sentence split on `.`, `!`, `?`; keeps the terminator with the
/// sentence and drops empty fragments.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        current.push(ch);
        if matches!(ch, '.' | '!' | '?') {
            let trimmed = current.trim();
            if !trimmed.is_empty() {
                out.push(trimmed.to_string());
            }
            current.clear();
        }
    }
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    out
}
