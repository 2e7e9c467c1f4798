//! Misuse filters for highlighted instances.
//!
//! Code spans that are really paths, equations, or software/terminology names
//! are dropped from the code data. Text spans whose content was also
//! highlighted as Code anywhere in the corpus are dropped from the text data.

use std::collections::{BTreeSet, HashSet};
use std::ops::AddAssign;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::FormatType;
use crate::markup::Sentence;

static PATH_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(/[^/ ]*)+/?$").expect("valid path regex"));

/// Anchored Unix absolute path test.
pub fn is_path(content: &str) -> bool {
    PATH_PATTERN.is_match(content)
}

const OPERATORS: &[char] = &['+', '-', '*', '/', '=', '<', '>', '^', '%'];

/// Equation test.
///
/// The content must lex entirely into numbers, identifiers of at most three
/// characters, the operators `+ - * / = < > ^ %`, parentheses and whitespace.
/// It is an equation when it is a complexity form like `O(n log n)`, or when
/// it has at least one operator and at least two operands.
pub fn is_equation(content: &str) -> bool {
    let chars: Vec<char> = content.trim().chars().collect();
    if chars.is_empty() {
        return false;
    }
    let mut operands = 0;
    let mut operators = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || c == '(' || c == ')' {
            i += 1;
        } else if OPERATORS.contains(&c) {
            operators += 1;
            i += 1;
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            operands += 1;
        } else if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            if i - start > 3 {
                return false;
            }
            operands += 1;
        } else {
            return false;
        }
    }
    is_complexity_form(&chars) || (operators > 0 && operands >= 2)
}

fn is_complexity_form(chars: &[char]) -> bool {
    matches!(chars.first(), Some('O' | 'o' | 'Θ' | 'Ω'))
        && chars.get(1) == Some(&'(')
        && chars.last() == Some(&')')
        && chars.len() > 3
}

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("tag dictionary is empty")]
    Empty,
    #[error("i/o error reading tag dictionary: {0}")]
    Io(#[from] std::io::Error),
}

/// Lowercased Stack Overflow tag names used to recognize software and terminology.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagDictionary {
    entries: BTreeSet<String>,
}

impl TagDictionary {
    pub fn new<I, S>(entries: I) -> Result<Self, DictionaryError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries: BTreeSet<String> = entries
            .into_iter()
            .map(|e| e.as_ref().trim().to_lowercase())
            .filter(|e| !e.is_empty())
            .collect();
        if entries.is_empty() {
            return Err(DictionaryError::Empty);
        }
        Ok(TagDictionary { entries })
    }

    /// One tag per line.
    pub fn from_text(text: &str) -> Result<Self, DictionaryError> {
        Self::new(text.lines())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, entry: &str) -> bool {
        self.entries.contains(entry)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyMatch {
    pub entry: String,
    pub score: f64,
}

/// Normalized edit-distance similarity, `100 * (1 - distance / max_len)`.
pub fn similarity(a: &str, b: &str) -> f64 {
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 100.0;
    }
    100.0 * (1.0 - strsim::levenshtein(a, b) as f64 / max_len as f64)
}

/// Best dictionary entry scoring at least `threshold` against the lowercased
/// content. Exact matches score 100; ties go to the lexicographically smaller entry.
pub fn fuzzy_lookup(content: &str, dict: &TagDictionary, threshold: f64) -> Option<FuzzyMatch> {
    let needle = content.trim().to_lowercase();
    if needle.is_empty() {
        return None;
    }
    if dict.contains(&needle) {
        return Some(FuzzyMatch {
            entry: needle,
            score: 100.0,
        });
    }
    let needle_len = needle.chars().count();
    let mut best: Option<FuzzyMatch> = None;
    for entry in dict.iter() {
        let entry_len = entry.chars().count();
        let max_len = needle_len.max(entry_len) as f64;
        // length difference alone bounds the achievable score
        let bound = 100.0 * (1.0 - needle_len.abs_diff(entry_len) as f64 / max_len);
        if bound < threshold {
            continue;
        }
        let score = similarity(&needle, entry);
        if score < threshold {
            continue;
        }
        // entries iterate in lexicographic order, so strict > keeps the smaller on ties
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(FuzzyMatch {
                entry: entry.to_string(),
                score,
            });
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisuseReason {
    Path,
    Equation,
    SoftwareOrTerminology,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub path: usize,
    pub equation: usize,
    pub software_or_terminology: usize,
    pub cross_highlighted_code_in_text: usize,
    pub foreign_tags_stripped: usize,
}

impl CleaningReport {
    pub fn total_removed(&self) -> usize {
        self.path + self.equation + self.software_or_terminology + self.cross_highlighted_code_in_text
    }

    fn record(&mut self, reason: MisuseReason) {
        match reason {
            MisuseReason::Path => self.path += 1,
            MisuseReason::Equation => self.equation += 1,
            MisuseReason::SoftwareOrTerminology => self.software_or_terminology += 1,
        }
    }
}

impl AddAssign for CleaningReport {
    fn add_assign(&mut self, rhs: Self) {
        self.path += rhs.path;
        self.equation += rhs.equation;
        self.software_or_terminology += rhs.software_or_terminology;
        self.cross_highlighted_code_in_text += rhs.cross_highlighted_code_in_text;
        self.foreign_tags_stripped += rhs.foreign_tags_stripped;
    }
}

pub const DEFAULT_FUZZY_THRESHOLD: f64 = 90.0;

/// Code-span misuse detector. Each rule can be switched off.
#[derive(Debug, Clone)]
pub struct CodeCleaner {
    pub dictionary: Option<TagDictionary>,
    pub fuzzy_threshold: f64,
    pub detect_paths: bool,
    pub detect_equations: bool,
}

impl CodeCleaner {
    pub fn new(dictionary: Option<TagDictionary>) -> Self {
        CodeCleaner {
            dictionary,
            fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
            detect_paths: true,
            detect_equations: true,
        }
    }

    pub fn classify(&self, content: &str) -> Option<MisuseReason> {
        if self.detect_paths && is_path(content) {
            return Some(MisuseReason::Path);
        }
        if self.detect_equations && is_equation(content) {
            return Some(MisuseReason::Equation);
        }
        let dict = self.dictionary.as_ref()?;
        fuzzy_lookup(content, dict, self.fuzzy_threshold).map(|_| MisuseReason::SoftwareOrTerminology)
    }
}

/// Drops misused Code spans. Other spans and the sentences themselves are kept.
pub fn clean_code_instances(sentences: Vec<Sentence>, cleaner: &CodeCleaner) -> (Vec<Sentence>, CleaningReport) {
    let mut report = CleaningReport::default();
    let cleaned = sentences
        .into_iter()
        .map(|mut sentence| {
            sentence.spans.retain(|span| {
                if span.format != FormatType::Code {
                    return true;
                }
                match cleaner.classify(&span.content) {
                    Some(reason) => {
                        report.record(reason);
                        false
                    }
                    None => true,
                }
            });
            sentence
        })
        .collect();
    (cleaned, report)
}

/// Contents of every Code span, for the text cross-check.
pub fn code_content_set<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> HashSet<String> {
    sentences
        .into_iter()
        .flat_map(|s| s.spans_of(FormatType::Code))
        .map(|s| s.content.clone())
        .collect()
}

/// Drops Bold/Italic/Heading/Delete spans whose content exactly equals some Code content.
pub fn clean_text_instances(
    sentences: Vec<Sentence>,
    code_contents: &HashSet<String>,
) -> (Vec<Sentence>, CleaningReport) {
    let mut report = CleaningReport::default();
    let cleaned = sentences
        .into_iter()
        .map(|mut sentence| {
            sentence.spans.retain(|span| {
                let cross = span.format != FormatType::Code && code_contents.contains(&span.content);
                report.cross_highlighted_code_in_text += usize::from(cross);
                !cross
            });
            sentence
        })
        .collect();
    (cleaned, report)
}

/// Keeps only `target` spans and re-tokenizes so that removed spans no longer cut tokens.
pub fn strip_foreign_tags(sentence: Sentence, target: FormatType) -> (Sentence, usize) {
    let before = sentence.spans.len();
    let kept: Vec<_> = sentence
        .spans
        .into_iter()
        .filter(|s| s.format == target)
        .collect();
    let stripped = before - kept.len();
    (
        Sentence::new(sentence.answer_id, sentence.index, sentence.start, sentence.text, kept),
        stripped,
    )
}
