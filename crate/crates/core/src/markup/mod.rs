//! Answer-body parsing: `<pre>` removal, highlight span extraction, sentence
//! segmentation and tokenization.
//!
//! All offsets are Unicode code-point indices. Spans index into the plain text
//! left after markup removal; sentence-level spans and tokens index into the
//! sentence text.

mod code_blocks;
mod sentences;
mod spans;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::format::FormatType;

pub use code_blocks::strip_code_blocks;
pub use sentences::{split_sentences, tokenize, Sentence, SentenceSpan, Token};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAnswer {
    pub post_id: u64,
    pub body: String,
}

/// One highlighted instance, `[start, end)` in plain-text code points.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub format: FormatType,
    pub start: usize,
    pub end: usize,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    /// Code-point offset into the input of the stage that raised it.
    pub offset: usize,
    pub message: String,
}

impl ParseWarning {
    pub(crate) fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseWarning {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub post_id: u64,
    /// Plain text with code blocks and highlight markup removed.
    pub text: String,
    pub code_blocks: Vec<String>,
    pub spans: Vec<HighlightSpan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<ParseWarning>,
}

impl ParsedAnswer {
    pub fn sentences(&self) -> Vec<Sentence> {
        split_sentences(self.post_id, &self.text, &self.spans)
    }
}

/// Result of [`extract_spans`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanExtraction {
    pub plain_text: String,
    pub spans: Vec<HighlightSpan>,
    pub warnings: Vec<ParseWarning>,
}

/// Removes taxonomy tags, other HTML tags and markdown delimiters, returning
/// the plain text and one span per highlighted instance.
///
/// Block-level HTML tags become line breaks. Entity references are decoded
/// and never act as markdown. Markdown is not interpreted inside code.
pub fn extract_spans(text: &str) -> SpanExtraction {
    let chars: Vec<char> = text.chars().collect();
    let ex = spans::extract(&chars);
    SpanExtraction {
        plain_text: ex.plain.into_iter().collect(),
        spans: ex.spans,
        warnings: ex.warnings,
    }
}

/// A fully parsed body that remembers where each plain character came from.
#[derive(Debug, Clone)]
pub struct ParsedBody {
    pub plain_text: String,
    pub code_blocks: Vec<String>,
    pub spans: Vec<HighlightSpan>,
    pub warnings: Vec<ParseWarning>,
    /// `origin[i]` is the `[start, end)` code-point range in the body that produced plain character `i`.
    pub origin: Vec<(usize, usize)>,
}

impl ParsedBody {
    /// Body range covering plain characters `[start, end)`.
    pub fn source_range(&self, start: usize, end: usize) -> (usize, usize) {
        debug_assert!(start < end && end <= self.origin.len());
        (self.origin[start].0, self.origin[end - 1].1)
    }
}

/// Parses a body without normalization so that `origin` indexes the exact input.
pub fn parse_body(body: &str) -> ParsedBody {
    let stripped = code_blocks::strip_mapped(body);
    let ex = spans::extract(&stripped.text);
    let origin = ex
        .origin
        .iter()
        .map(|&(s, e)| (stripped.origin[s], stripped.origin[e - 1] + 1))
        .collect();
    let mut warnings = stripped.warnings;
    warnings.extend(ex.warnings.into_iter().map(|w| ParseWarning {
        offset: stripped.origin.get(w.offset).copied().unwrap_or(w.offset),
        message: w.message,
    }));
    ParsedBody {
        plain_text: ex.plain.into_iter().collect(),
        code_blocks: stripped.code_blocks,
        spans: ex.spans,
        warnings,
        origin,
    }
}

/// Ingest-time parse: NFC-normalizes the body, then strips code blocks and extracts spans.
pub fn parse_answer(raw: &RawAnswer) -> ParsedAnswer {
    let normalized: String = raw.body.nfc().collect();
    let parsed = parse_body(&normalized);
    ParsedAnswer {
        post_id: raw.post_id,
        text: parsed.plain_text,
        code_blocks: parsed.code_blocks,
        spans: parsed.spans,
        warnings: parsed.warnings,
    }
}

/// Re-inserts spans as HTML tags, escaping everything the parser would
/// otherwise interpret. Parsing the result yields `plain` and `spans` again
/// (headings must cover whole lines for that to hold).
pub fn render_html(plain: &str, spans: &[HighlightSpan]) -> String {
    let chars: Vec<char> = plain.chars().collect();
    let mut opens: Vec<Vec<&HighlightSpan>> = vec![Vec::new(); chars.len() + 1];
    let mut closes: Vec<Vec<&HighlightSpan>> = vec![Vec::new(); chars.len() + 1];
    for span in spans {
        opens[span.start].push(span);
        closes[span.end].push(span);
    }
    let mut out = String::with_capacity(plain.len() + spans.len() * 16);
    for pos in 0..=chars.len() {
        // inner spans close first, outer spans open first
        closes[pos].sort_by_key(|s| std::cmp::Reverse(s.start));
        for s in &closes[pos] {
            out.push_str("</");
            out.push_str(html_tag(s.format));
            out.push('>');
        }
        opens[pos].sort_by_key(|s| std::cmp::Reverse(s.end));
        for s in &opens[pos] {
            out.push('<');
            out.push_str(html_tag(s.format));
            out.push('>');
        }
        if let Some(&c) = chars.get(pos) {
            match c {
                '<' => out.push_str("&lt;"),
                '>' => out.push_str("&gt;"),
                '&' => out.push_str("&amp;"),
                '*' => out.push_str("&#42;"),
                '_' => out.push_str("&#95;"),
                '`' => out.push_str("&#96;"),
                '#' => out.push_str("&#35;"),
                _ => out.push(c),
            }
        }
    }
    out
}

fn html_tag(format: FormatType) -> &'static str {
    match format {
        FormatType::Code => "code",
        FormatType::Bold => "strong",
        FormatType::Italic => "em",
        FormatType::Delete => "del",
        FormatType::Heading => "h2",
    }
}
