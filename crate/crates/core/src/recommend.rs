//! Turns model predictions on a draft into suggestions, settles overlaps
//! between models, and writes accepted suggestions back into the draft.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bioe::{decode_spans, BioTag};
use crate::format::FormatType;
use crate::labeler::embed::stable_hash;
use crate::labeler::LabelerModel;
use crate::markup::{parse_body, split_sentences, ParseWarning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    /// Stable across requests for the same body, span and type.
    pub id: String,
    pub format: FormatType,
    pub sentence: usize,
    /// Token range `[token_start, token_end)` within the sentence.
    pub token_start: usize,
    pub token_end: usize,
    /// Code-point range `[char_start, char_end)` into the draft.
    pub char_start: usize,
    pub char_end: usize,
    pub content: String,
    pub confidence: f64,
    pub note: Option<String>,
}

impl Suggestion {
    fn overlaps(&self, other: &Suggestion) -> bool {
        self.sentence == other.sentence && self.token_start < other.token_end && other.token_start < self.token_end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecommendError {
    #[error("no models loaded")]
    NoModels,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuggestOutput {
    pub suggestions: Vec<Suggestion>,
    pub parser_warnings: Vec<ParseWarning>,
}

fn suggestion_id(body: &str, model: FormatType, format: FormatType, start: usize, end: usize) -> String {
    let key = format!("{model}\u{0}{format}\u{0}{start}\u{0}{end}\u{0}{body}");
    format!("{:016x}", stable_hash(0xfe, &key))
}

fn type_rank(f: FormatType) -> usize {
    f.index()
}

/// Runs every model on every sentence of `draft`. Tokens already inside a
/// highlight are never suggested. A Heading suggestion that is not a whole
/// line becomes Bold.
pub fn suggest_all(draft: &str, models: &[LabelerModel]) -> Result<SuggestOutput, RecommendError> {
    if models.is_empty() {
        return Err(RecommendError::NoModels);
    }
    let parsed = parse_body(draft);
    let body: Vec<char> = draft.chars().collect();
    let sentences = split_sentences(0, &parsed.plain_text, &parsed.spans);

    let mut out = Vec::new();
    for sentence in &sentences {
        if sentence.tokens.is_empty() {
            continue;
        }
        let texts: Vec<String> = sentence.tokens.iter().map(|t| t.text.clone()).collect();
        let taken: Vec<bool> = sentence
            .tokens
            .iter()
            .map(|t| sentence.spans.iter().any(|s| s.start < t.end && t.start < s.end))
            .collect();
        for model in models {
            let prediction = model.predict(&texts);
            let tags: Vec<BioTag> = prediction
                .tags
                .iter()
                .zip(&taken)
                .map(|(&t, &masked)| if masked { BioTag::O } else { t })
                .collect();
            for span in decode_spans(&tags) {
                let first = &sentence.tokens[span.start];
                let last = &sentence.tokens[span.end - 1];
                let (char_start, char_end) =
                    parsed.source_range(sentence.start + first.start, sentence.start + last.end);
                let content: String = body[char_start..char_end].iter().collect();
                let confidence = span.tokens().map(|i| prediction.probs[i][tags[i].index()]).sum::<f64>() / span.len() as f64;
                let mut format = model.format();
                let mut note = None;
                if format == FormatType::Heading && !is_whole_line(&body, char_start, char_end) {
                    format = FormatType::Bold;
                    note = Some("heading demoted to bold: span is not a whole line".to_string());
                }
                out.push(Suggestion {
                    id: suggestion_id(draft, model.format(), format, char_start, char_end),
                    format,
                    sentence: sentence.index,
                    token_start: span.start,
                    token_end: span.end,
                    char_start,
                    char_end,
                    content,
                    confidence: confidence.clamp(0.0, 1.0),
                    note,
                });
            }
        }
    }
    sort_positional(&mut out);
    Ok(SuggestOutput {
        suggestions: out,
        parser_warnings: parsed.warnings,
    })
}

fn sort_positional(s: &mut [Suggestion]) {
    s.sort_by(|a, b| {
        (a.sentence, a.token_start, type_rank(a.format), a.token_end, &a.id)
            .cmp(&(b.sentence, b.token_start, type_rank(b.format), b.token_end, &b.id))
    });
}

fn line_bounds(body: &[char], start: usize, end: usize) -> (usize, usize) {
    let line_start = body[..start].iter().rposition(|&c| c == '\n').map_or(0, |p| p + 1);
    let line_end = body[end..].iter().position(|&c| c == '\n').map_or(body.len(), |p| end + p);
    (line_start, line_end)
}

fn is_whole_line(body: &[char], start: usize, end: usize) -> bool {
    let (ls, le) = line_bounds(body, start, end);
    body[ls..start].iter().all(|c| c.is_whitespace()) && body[end..le].iter().all(|c| c.is_whitespace())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionMode {
    #[default]
    HighestConfidence,
    AllWithScores,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionPolicy {
    pub mode: ResolutionMode,
    /// Earlier types win confidence ties.
    pub tie_order: Vec<FormatType>,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        ResolutionPolicy {
            mode: ResolutionMode::HighestConfidence,
            tie_order: FormatType::MODELED.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tie order must list code, bold, italic and heading exactly once")]
pub struct PolicyError;

impl ResolutionPolicy {
    pub fn new(mode: ResolutionMode, tie_order: Vec<FormatType>) -> Result<Self, PolicyError> {
        let mut sorted = tie_order.clone();
        sorted.sort_by_key(|f| f.index());
        if sorted != FormatType::MODELED {
            return Err(PolicyError);
        }
        Ok(ResolutionPolicy { mode, tie_order })
    }

    fn tie_rank(&self, f: FormatType) -> usize {
        self.tie_order.iter().position(|&x| x == f).unwrap_or(usize::MAX)
    }

    /// `Greater` when `a` beats `b`.
    fn compare(&self, a: &Suggestion, b: &Suggestion) -> Ordering {
        if a.confidence > b.confidence {
            return Ordering::Greater;
        }
        if b.confidence > a.confidence {
            return Ordering::Less;
        }
        self.tie_rank(b.format)
            .cmp(&self.tie_rank(a.format))
            .then_with(|| (b.sentence, b.token_start, b.token_end, &b.id).cmp(&(a.sentence, a.token_start, a.token_end, &a.id)))
    }
}

/// In highest-confidence mode keeps one suggestion per connected group of
/// token-overlapping suggestions. In all-with-scores mode returns everything,
/// best first.
pub fn resolve_conflicts(suggestions: &[Suggestion], policy: &ResolutionPolicy) -> Vec<Suggestion> {
    match policy.mode {
        ResolutionMode::AllWithScores => {
            let mut all = suggestions.to_vec();
            all.sort_by(|a, b| policy.compare(b, a));
            all
        }
        ResolutionMode::HighestConfidence => {
            let n = suggestions.len();
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(parent: &mut [usize], mut i: usize) -> usize {
                while parent[i] != i {
                    parent[i] = parent[parent[i]];
                    i = parent[i];
                }
                i
            }
            for i in 0..n {
                for j in i + 1..n {
                    if suggestions[i].overlaps(&suggestions[j]) {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a] = b;
                    }
                }
            }
            let mut best: Vec<Option<usize>> = vec![None; n];
            for i in 0..n {
                let root = find(&mut parent, i);
                match best[root] {
                    Some(b) if policy.compare(&suggestions[b], &suggestions[i]) != Ordering::Less => {}
                    _ => best[root] = Some(i),
                }
            }
            let mut kept: Vec<Suggestion> = best.into_iter().flatten().map(|i| suggestions[i].clone()).collect();
            sort_positional(&mut kept);
            kept
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("suggestion {id} is outside the draft")]
    OutOfRange { id: String },
    #[error("suggestions {a} and {b} overlap without nesting")]
    Overlap { a: String, b: String },
    #[error("heading suggestion {id} does not cover a whole line")]
    HeadingNotLine { id: String },
}

const MARKUP_CHARS: &[char] = &['*', '_', '`', '<', '>', '&', '#', '\\'];

fn html_tag(format: FormatType) -> &'static str {
    match format {
        FormatType::Code => "code",
        FormatType::Bold => "strong",
        FormatType::Italic => "em",
        FormatType::Delete => "del",
        FormatType::Heading => "h2",
    }
}

/// Inserts markup for `accepted` into `draft`. Markdown markers are used where
/// they re-parse unambiguously, HTML tags otherwise. Nested suggestions are
/// allowed; partial overlaps are not.
pub fn render_markdown(draft: &str, accepted: &[Suggestion]) -> Result<String, RenderError> {
    let body: Vec<char> = draft.chars().collect();
    for s in accepted {
        if s.char_start >= s.char_end || s.char_end > body.len() {
            return Err(RenderError::OutOfRange { id: s.id.clone() });
        }
        if s.format == FormatType::Heading && !is_whole_line(&body, s.char_start, s.char_end) {
            return Err(RenderError::HeadingNotLine { id: s.id.clone() });
        }
    }
    for (i, a) in accepted.iter().enumerate() {
        for b in &accepted[i + 1..] {
            let (a0, a1, b0, b1) = (a.char_start, a.char_end, b.char_start, b.char_end);
            if a0 < b1 && b0 < a1 {
                let nested = (a0 <= b0 && b1 <= a1) || (b0 <= a0 && a1 <= b1);
                let same_range = a0 == b0 && a1 == b1;
                if !nested || a.format == b.format || same_range {
                    return Err(RenderError::Overlap {
                        a: a.id.clone(),
                        b: b.id.clone(),
                    });
                }
            }
        }
    }

    let boundary_shared = |s: &Suggestion| {
        accepted.iter().any(|o| {
            !std::ptr::eq(o, s)
                && o.format != FormatType::Heading
                && [o.char_start, o.char_end].iter().any(|&p| p == s.char_start || p == s.char_end)
        })
    };
    // (position, open?, span length, text); closers sort before openers at a position
    let mut inserts: Vec<(usize, bool, usize, String)> = Vec::new();
    for s in accepted {
        let len = s.char_end - s.char_start;
        if s.format == FormatType::Heading {
            let (line_start, _) = line_bounds(&body, s.char_start, s.char_end);
            inserts.push((line_start, true, usize::MAX, "## ".to_string()));
            continue;
        }
        let content = &body[s.char_start..s.char_end];
        let before = s.char_start.checked_sub(1).map(|k| body[k]);
        let after = body.get(s.char_end).copied();
        let plain = !content.iter().any(|c| MARKUP_CHARS.contains(c))
            && !boundary_shared(s)
            && !matches!(before, Some('*' | '_' | '`'))
            && !matches!(after, Some('*' | '_' | '`'));
        let (open, close) = match (plain, s.format) {
            (true, FormatType::Code) => ("`".to_string(), "`".to_string()),
            (true, FormatType::Bold) => ("**".to_string(), "**".to_string()),
            (true, FormatType::Italic) => ("*".to_string(), "*".to_string()),
            (_, f) => (format!("<{}>", html_tag(f)), format!("</{}>", html_tag(f))),
        };
        inserts.push((s.char_start, true, len, open));
        inserts.push((s.char_end, false, len, close));
    }
    // at one position: closers (inner first), then openers (outer first)
    inserts.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| match (a.1, b.1) {
            (false, true) => Ordering::Less,
            (true, false) => Ordering::Greater,
            (true, true) => b.2.cmp(&a.2),
            (false, false) => a.2.cmp(&b.2),
        })
    });

    let mut out = String::with_capacity(draft.len() + inserts.len() * 8);
    let mut next = 0;
    for (pos, _, _, text) in &inserts {
        out.extend(&body[next..*pos]);
        out.push_str(text);
        next = *pos;
    }
    out.extend(&body[next..]);
    Ok(out)
}
