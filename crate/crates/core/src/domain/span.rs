//! Half-open character ranges over a normalized email body.
//!
//! Offsets count Unicode scalar values, not bytes, so the same span means the
//! same text for every client regardless of its string encoding. Bodies are
//! normalized to `\n` line endings before any span is taken.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// True when `other` lies entirely inside `self`.
    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn contains_pos(&self, pos: usize) -> bool {
        self.start <= pos && pos < self.end
    }

    pub fn intersection(&self, other: &Span) -> Option<Span> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start < end).then_some(Span { start, end })
    }

    pub fn is_within(&self, len: usize) -> bool {
        self.start <= self.end && self.end <= len
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Canonical body form: every `\r\n` and lone `\r` becomes `\n`.
pub fn normalize_newlines(text: &str) -> String {
    if !text.contains('\r') {
        return text.to_owned();
    }
    text.replace("\r\n", "\n").replace('\r', "\n")
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte range of a character span, or `None` when the span is out of bounds.
pub fn byte_range(text: &str, span: Span) -> Option<Range<usize>> {
    if span.start > span.end {
        return None;
    }
    let mut start = None;
    let mut count = 0;
    for (idx, _) in text.char_indices() {
        if count == span.start {
            start = Some(idx);
        }
        if count == span.end {
            return start.map(|s| s..idx);
        }
        count += 1;
    }
    if count == span.start {
        start = Some(text.len());
    }
    if count == span.end {
        return start.map(|s| s..text.len());
    }
    None
}

pub fn slice(text: &str, span: Span) -> Option<&str> {
    byte_range(text, span).map(|r| &text[r])
}

/// Replace the text under `span`. Panics are avoided by returning `None` for
/// invalid spans.
pub fn replace(text: &str, span: Span, replacement: &str) -> Option<String> {
    let range = byte_range(text, span)?;
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..range.start]);
    out.push_str(replacement);
    out.push_str(&text[range.end..]);
    Some(out)
}

/// Character offset of the first occurrence of `needle` at or after `from`.
pub fn find_from(text: &str, needle: &str, from: usize) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let start_byte = byte_range(text, Span::new(from, from))?.start;
    let found = text[start_byte..].find(needle)?;
    Some(from + char_len(&text[start_byte..start_byte + found]))
}

/// Shrink a span so it excludes leading and trailing whitespace.
pub fn trim_span(text: &str, span: Span) -> Span {
    let Some(inner) = slice(text, span) else {
        return span;
    };
    let leading = inner.chars().take_while(|c| c.is_whitespace()).count();
    let total = char_len(inner);
    if leading == total {
        return Span::new(span.start, span.start);
    }
    let trailing = inner.chars().rev().take_while(|c| c.is_whitespace()).count();
    Span::new(span.start + leading, span.end - trailing)
}

/// Extend `span` to the sentence boundaries that enclose it.
///
/// A sentence ends after `.`, `!` or `?` followed by whitespace, or at a
/// newline.
pub fn sentence_bounds(text: &str, span: Span) -> Span {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let is_break_before = |i: usize| -> bool {
        // true when a sentence starts at i
        if i == 0 {
            return true;
        }
        let prev = chars[i - 1];
        if prev == '\n' {
            return true;
        }
        if prev.is_whitespace() && i >= 2 {
            let mut j = i - 1;
            while j > 0 && chars[j - 1].is_whitespace() && chars[j - 1] != '\n' {
                j -= 1;
            }
            return j > 0 && matches!(chars[j - 1], '.' | '!' | '?' | '\n');
        }
        false
    };
    let mut start = span.start.min(n);
    while start > 0 && !is_break_before(start) {
        start -= 1;
    }
    while start < n && chars[start].is_whitespace() && start < span.start {
        start += 1;
    }
    let mut end = span.end.min(n);
    if end > start && matches!(chars[end - 1], '.' | '!' | '?') {
        return Span::new(start, end);
    }
    while end < n {
        let c = chars[end];
        if c == '\n' {
            break;
        }
        end += 1;
        if matches!(c, '.' | '!' | '?') && (end == n || chars[end].is_whitespace()) {
            break;
        }
    }
    Span::new(start, end)
}

/// True when a boundary at `pos` splits a word in two.
pub fn splits_word(text: &str, pos: usize) -> bool {
    if pos == 0 {
        return false;
    }
    let mut it = text.chars().skip(pos - 1);
    match (it.next(), it.next()) {
        (Some(a), Some(b)) => a.is_alphanumeric() && b.is_alphanumeric(),
        _ => false,
    }
}
