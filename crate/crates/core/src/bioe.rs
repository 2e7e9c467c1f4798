//! BIOE token labels and span decoding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::FormatType;

/// Position of a token relative to a highlighted instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BioTag {
    O,
    B,
    I,
    E,
}

impl BioTag {
    pub const ALL: [BioTag; 4] = [BioTag::O, BioTag::B, BioTag::I, BioTag::E];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> BioTag {
        BioTag::ALL[idx]
    }
}

/// A tag paired with the format of the model that emits it, e.g. `B-code`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Label {
    pub tag: BioTag,
    pub format: FormatType,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tag {
            BioTag::O => f.write_str("O"),
            BioTag::B => write!(f, "B-{}", self.format),
            BioTag::I => write!(f, "I-{}", self.format),
            BioTag::E => write!(f, "E-{}", self.format),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid label `{0}`")]
pub struct InvalidLabel(pub String);

impl Label {
    /// Parses `O` or `X-format`. `O` carries no format, so the caller supplies one.
    pub fn parse(s: &str, default_format: FormatType) -> Result<Label, InvalidLabel> {
        if s == "O" {
            return Ok(Label {
                tag: BioTag::O,
                format: default_format,
            });
        }
        let (tag, format) = s.split_once('-').ok_or_else(|| InvalidLabel(s.into()))?;
        let tag = match tag {
            "B" => BioTag::B,
            "I" => BioTag::I,
            "E" => BioTag::E,
            _ => return Err(InvalidLabel(s.into())),
        };
        let format = FormatType::from_str(format).map_err(|_| InvalidLabel(s.into()))?;
        Ok(Label { tag, format })
    }
}

/// Token range `[start, end)` within a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end);
        TokenSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn overlaps(&self, other: &TokenSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn tokens(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("span {start}..{end} exceeds {len} tokens")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error("spans overlap at token {0}")]
    Overlap(usize),
}

/// Encodes disjoint spans: one token gives `B`, longer spans `B I* E`.
pub fn encode_tags(n_tokens: usize, spans: &[TokenSpan]) -> Result<Vec<BioTag>, TagError> {
    let mut tags = vec![BioTag::O; n_tokens];
    for span in spans {
        if span.is_empty() || span.end > n_tokens {
            return Err(TagError::OutOfRange {
                start: span.start,
                end: span.end,
                len: n_tokens,
            });
        }
        for i in span.tokens() {
            if tags[i] != BioTag::O {
                return Err(TagError::Overlap(i));
            }
            tags[i] = if i == span.start {
                BioTag::B
            } else if i + 1 == span.end {
                BioTag::E
            } else {
                BioTag::I
            };
        }
    }
    Ok(tags)
}

/// Decodes tags into spans, repairing invalid sequences: an `I` or `E` with no
/// open span opens one, and a span still open at an `O` or at the end closes
/// at its last non-`O` token. Total on every input.
pub fn decode_spans(tags: &[BioTag]) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            BioTag::O => {
                if let Some(start) = open.take() {
                    spans.push(TokenSpan::new(start, i));
                }
            }
            BioTag::B => {
                if let Some(start) = open.replace(i) {
                    spans.push(TokenSpan::new(start, i));
                }
            }
            BioTag::I => {
                open.get_or_insert(i);
            }
            BioTag::E => match open.take() {
                Some(start) => spans.push(TokenSpan::new(start, i + 1)),
                None => open = Some(i),
            },
        }
    }
    if let Some(start) = open {
        spans.push(TokenSpan::new(start, tags.len()));
    }
    spans
}

/// True when every `I`/`E` continues a span opened by `B` or `I`.
pub fn is_valid_sequence(tags: &[BioTag]) -> bool {
    let mut open = false;
    for &tag in tags {
        match tag {
            BioTag::O => open = false,
            BioTag::B => open = true,
            BioTag::I => {
                if !open {
                    return false;
                }
            }
            BioTag::E => {
                if !open {
                    return false;
                }
                open = false;
            }
        }
    }
    true
}
