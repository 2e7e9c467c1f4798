use serde::{Deserialize, Serialize};

use super::HighlightSpan;
use crate::format::FormatType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// A span re-based onto its sentence.
pub type SentenceSpan = HighlightSpan;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub answer_id: u64,
    pub index: usize,
    /// Offset of the sentence's first character in the answer's plain text.
    pub start: usize,
    pub text: String,
    pub tokens: Vec<Token>,
    pub spans: Vec<SentenceSpan>,
}

impl Sentence {
    /// Builds a sentence from text and sentence-relative spans, tokenizing it.
    pub fn new(answer_id: u64, index: usize, start: usize, text: String, spans: Vec<SentenceSpan>) -> Self {
        let tokens = tokenize(&text, &spans);
        Sentence {
            answer_id,
            index,
            start,
            text,
            tokens,
            spans,
        }
    }

    /// Token index range `[first, last + 1)` covered by a sentence-relative span,
    /// or `None` when the span edges do not fall on token boundaries.
    pub fn token_range(&self, span: &SentenceSpan) -> Option<(usize, usize)> {
        let first = self.tokens.iter().position(|t| t.start == span.start)?;
        let last = self.tokens.iter().position(|t| t.end == span.end)?;
        (first <= last).then_some((first, last + 1))
    }

    pub fn spans_of(&self, format: FormatType) -> impl Iterator<Item = &SentenceSpan> {
        self.spans.iter().filter(move |s| s.format == format)
    }
}

const TERMINATORS: &[char] = &['.', '!', '?'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '”', '’', '»'];

/// Splits plain text into sentences at `.`/`!`/`?` (followed by whitespace and
/// a non-lowercase start) and at newlines. Never cuts inside a span, and a
/// terminator inside a Code span is never a boundary.
pub fn split_sentences(answer_id: u64, plain_text: &str, spans: &[HighlightSpan]) -> Vec<Sentence> {
    let chars: Vec<char> = plain_text.chars().collect();
    let n = chars.len();
    let inside = |pos: usize| spans.iter().any(|s| s.start < pos && pos < s.end);
    let in_span = |i: usize| spans.iter().any(|s| s.start <= i && i < s.end);
    let in_code =
        |i: usize| spans.iter().any(|s| s.format == FormatType::Code && s.start <= i && i < s.end);

    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut seg_start = 0;
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if c == '\n' && !in_span(i) {
            segments.push((seg_start, i));
            seg_start = i + 1;
            i += 1;
            continue;
        }
        if TERMINATORS.contains(&c) && !in_code(i) {
            let mut j = i + 1;
            while j < n && (TERMINATORS.contains(&chars[j]) || CLOSERS.contains(&chars[j])) {
                j += 1;
            }
            let followed_by_space = j == n || chars[j].is_whitespace();
            let next_word = chars[j..].iter().find(|c| !c.is_whitespace());
            let continues_lowercase = next_word.is_some_and(|c| c.is_lowercase());
            if followed_by_space && !continues_lowercase && !inside(j) {
                segments.push((seg_start, j));
                seg_start = j;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    segments.push((seg_start, n));

    let mut sentences = Vec::new();
    for (mut a, mut b) in segments {
        while a < b && chars[a].is_whitespace() {
            a += 1;
        }
        while b > a && chars[b - 1].is_whitespace() {
            b -= 1;
        }
        if a == b {
            continue;
        }
        let local: Vec<SentenceSpan> = spans
            .iter()
            .filter(|s| s.start >= a && s.end <= b)
            .map(|s| HighlightSpan {
                format: s.format,
                start: s.start - a,
                end: s.end - a,
                content: s.content.clone(),
            })
            .collect();
        let text: String = chars[a..b].iter().collect();
        sentences.push(Sentence::new(answer_id, sentences.len(), a, text, local));
    }
    sentences
}

const LEADING_PUNCT: &[char] = &['(', '[', '{', '"', '\'', '“', '‘', '«'];
const TRAILING_PUNCT: &[char] = &[
    '.', ',', '!', '?', ';', ':', '"', '\'', ')', ']', '}', '”', '’', '»', '…',
];

fn bracket_pair(c: char) -> Option<(char, char)> {
    match c {
        '(' | ')' => Some(('(', ')')),
        '[' | ']' => Some(('[', ']')),
        '{' | '}' => Some(('{', '}')),
        _ => None,
    }
}

/// Whitespace tokenization with punctuation detachment.
///
/// Tokens are additionally cut at every span edge, and characters inside a
/// Code span are never detached. Brackets are only detached when unbalanced
/// within the word, so `foo()` stays whole.
pub fn tokenize(sentence_text: &str, spans: &[SentenceSpan]) -> Vec<Token> {
    let chars: Vec<char> = sentence_text.chars().collect();
    let n = chars.len();
    let mut cut = vec![false; n + 1];
    let mut code = vec![false; n];
    for s in spans {
        if s.end <= n {
            cut[s.start] = true;
            cut[s.end] = true;
            if s.format == FormatType::Code {
                code[s.start..s.end].iter_mut().for_each(|c| *c = true);
            }
        }
    }

    let mut tokens = Vec::new();
    let push = |a: usize, b: usize, tokens: &mut Vec<Token>| {
        tokens.push(Token {
            text: chars[a..b].iter().collect(),
            start: a,
            end: b,
        })
    };
    let mut i = 0;
    while i < n {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let word_start = i;
        while i < n && !chars[i].is_whitespace() {
            i += 1;
        }
        let mut piece_start = word_start;
        for k in word_start + 1..=i {
            if k == i || cut[k] {
                let (mut p, mut q) = (piece_start, k);
                if code[p] {
                    push(p, q, &mut tokens);
                } else {
                    let mut trailing = Vec::new();
                    while q - p > 1 && detachable_leading(&chars[p..q]) {
                        push(p, p + 1, &mut tokens);
                        p += 1;
                    }
                    while q - p > 1 && detachable_trailing(&chars[p..q]) {
                        trailing.push(q - 1);
                        q -= 1;
                    }
                    push(p, q, &mut tokens);
                    for t in trailing.into_iter().rev() {
                        push(t, t + 1, &mut tokens);
                    }
                }
                piece_start = k;
            }
        }
    }
    tokens
}

fn detachable_leading(piece: &[char]) -> bool {
    let c = piece[0];
    if !LEADING_PUNCT.contains(&c) {
        return false;
    }
    match bracket_pair(c) {
        Some((_, close)) => !piece.contains(&close),
        None => true,
    }
}

fn detachable_trailing(piece: &[char]) -> bool {
    let c = piece[piece.len() - 1];
    if !TRAILING_PUNCT.contains(&c) {
        return false;
    }
    match bracket_pair(c) {
        Some((open, close)) => {
            let opens = piece.iter().filter(|&&x| x == open).count();
            let closes = piece.iter().filter(|&&x| x == close).count();
            closes > opens
        }
        None => true,
    }
}
