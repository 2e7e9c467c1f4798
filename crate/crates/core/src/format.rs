//! The five highlighting formats and the markers that produce them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A highlighting format, grouped by rendering effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatType {
    Code,
    Bold,
    Italic,
    Delete,
    Heading,
}

impl FormatType {
    pub const ALL: [FormatType; 5] = [
        FormatType::Code,
        FormatType::Bold,
        FormatType::Italic,
        FormatType::Delete,
        FormatType::Heading,
    ];

    /// Formats that get a trained tagger. Delete is parsed and counted but never modeled.
    pub const MODELED: [FormatType; 4] = [
        FormatType::Code,
        FormatType::Bold,
        FormatType::Italic,
        FormatType::Heading,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormatType::Code => "code",
            FormatType::Bold => "bold",
            FormatType::Italic => "italic",
            FormatType::Delete => "delete",
            FormatType::Heading => "heading",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }

    pub(crate) fn from_index(idx: usize) -> Option<FormatType> {
        FormatType::ALL.get(idx).copied()
    }
}

impl fmt::Display for FormatType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown format type `{0}`")]
pub struct UnknownFormat(pub String);

impl FromStr for FormatType {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "code" => Ok(FormatType::Code),
            "bold" => Ok(FormatType::Bold),
            "italic" => Ok(FormatType::Italic),
            "delete" => Ok(FormatType::Delete),
            "heading" => Ok(FormatType::Heading),
            _ => Err(UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown highlight marker `{0}`")]
pub struct UnknownMarker(pub String);

/// Maps an HTML tag name or a markdown delimiter to its format.
///
/// Tag names are matched case-insensitively. Markdown delimiters are the
/// backtick (any run length), `**`, `__`, a single `*`, and one to six `#`.
pub fn classify_marker(marker: &str) -> Result<FormatType, UnknownMarker> {
    let unknown = || UnknownMarker(marker.to_string());
    if marker.is_empty() {
        return Err(unknown());
    }
    if marker.chars().all(|c| c == '`') {
        return Ok(FormatType::Code);
    }
    match marker {
        "**" | "__" => return Ok(FormatType::Bold),
        "*" => return Ok(FormatType::Italic),
        _ => {}
    }
    if marker.chars().all(|c| c == '#') {
        return if marker.len() <= 6 {
            Ok(FormatType::Heading)
        } else {
            Err(unknown())
        };
    }
    tag_format(marker).ok_or_else(unknown)
}

/// Format for an HTML tag name, `None` for tags outside the taxonomy.
pub(crate) fn tag_format(name: &str) -> Option<FormatType> {
    let lower = name.to_ascii_lowercase();
    match lower.as_str() {
        "code" => Some(FormatType::Code),
        "b" | "strong" => Some(FormatType::Bold),
        "i" | "em" => Some(FormatType::Italic),
        "del" | "s" => Some(FormatType::Delete),
        "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => Some(FormatType::Heading),
        _ => None,
    }
}
