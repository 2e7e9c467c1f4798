//! Per-format BIOE datasets built from parsed answers.

mod clean;
mod split;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bioe::{encode_tags, is_valid_sequence, BioTag, InvalidLabel, Label, TagError, TokenSpan};
use crate::format::FormatType;
use crate::markup::{ParsedAnswer, Sentence};

pub use clean::{
    clean_code_instances, clean_text_instances, code_content_set, fuzzy_lookup, is_equation,
    is_path, similarity, strip_foreign_tags, CleaningReport, CodeCleaner, DictionaryError,
    FuzzyMatch, MisuseReason, TagDictionary, DEFAULT_FUZZY_THRESHOLD,
};
pub use split::{split_dataset, SplitError, DEFAULT_SEED};

/// One training or evaluation example for a single format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<BioTag>,
    pub post_id: u64,
    pub format: FormatType,
}

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("sentence {post_id}:{index}: span `{content}` does not fall on token boundaries")]
    Misaligned {
        post_id: u64,
        index: usize,
        content: String,
    },
    #[error("sentence {post_id}:{index}: {source}")]
    Tags {
        post_id: u64,
        index: usize,
        #[source]
        source: TagError,
    },
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{0}")]
    Label(#[from] InvalidLabel),
    #[error("label `{found}` in a {expected} dataset")]
    WrongFormat { expected: FormatType, found: String },
    #[error("{tokens} tokens but {labels} labels")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error("invalid BIOE sequence")]
    InvalidSequence,
}

impl LabeledSentence {
    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.tags.iter().map(|&tag| Label {
            tag,
            format: self.format,
        })
    }

    pub fn spans(&self) -> Vec<TokenSpan> {
        crate::bioe::decode_spans(&self.tags)
    }

    pub fn has_highlight(&self) -> bool {
        self.tags.iter().any(|&t| t != BioTag::O)
    }

    pub fn to_record(&self) -> DatasetRecord {
        DatasetRecord {
            tokens: self.tokens.clone(),
            labels: self.labels().map(|l| l.to_string()).collect(),
            post_id: self.post_id,
        }
    }

    pub fn from_record(record: DatasetRecord, format: FormatType) -> Result<Self, RecordError> {
        if record.tokens.len() != record.labels.len() {
            return Err(RecordError::LengthMismatch {
                tokens: record.tokens.len(),
                labels: record.labels.len(),
            });
        }
        let mut tags = Vec::with_capacity(record.labels.len());
        for raw in &record.labels {
            let label = Label::parse(raw, format)?;
            if label.format != format {
                return Err(RecordError::WrongFormat {
                    expected: format,
                    found: raw.clone(),
                });
            }
            tags.push(label.tag);
        }
        if !is_valid_sequence(&tags) {
            return Err(RecordError::InvalidSequence);
        }
        Ok(LabeledSentence {
            tokens: record.tokens,
            tags,
            post_id: record.post_id,
            format,
        })
    }
}

/// On-disk dataset line: `{"tokens":[...],"labels":[...],"post_id":n}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub tokens: Vec<String>,
    pub labels: Vec<String>,
    pub post_id: u64,
}

impl DatasetRecord {
    /// Format named by the first non-`O` label, if any.
    pub fn infer_format(&self) -> Option<FormatType> {
        self.labels
            .iter()
            .find(|l| l.as_str() != "O")
            .and_then(|l| l.split_once('-'))
            .and_then(|(_, f)| f.parse().ok())
    }
}

/// Labels the sentence's `target` spans; all other tokens are `O`.
pub fn encode_bioe(sentence: &Sentence, target: FormatType) -> Result<LabeledSentence, EncodingError> {
    let mut spans = Vec::new();
    for span in sentence.spans_of(target) {
        let (start, end) = sentence
            .token_range(span)
            .ok_or_else(|| EncodingError::Misaligned {
                post_id: sentence.answer_id,
                index: sentence.index,
                content: span.content.clone(),
            })?;
        spans.push(TokenSpan::new(start, end));
    }
    let tags = encode_tags(sentence.tokens.len(), &spans).map_err(|source| EncodingError::Tags {
        post_id: sentence.answer_id,
        index: sentence.index,
        source,
    })?;
    Ok(LabeledSentence {
        tokens: sentence.tokens.iter().map(|t| t.text.clone()).collect(),
        tags,
        post_id: sentence.answer_id,
        format: target,
    })
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub target: FormatType,
    /// `None` disables code cleaning.
    pub cleaner: Option<CodeCleaner>,
    pub cross_check_text: bool,
}

impl BuildOptions {
    pub fn new(target: FormatType, cleaner: Option<CodeCleaner>) -> Self {
        BuildOptions {
            target,
            cleaner,
            cross_check_text: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltDataset {
    pub sentences: Vec<LabeledSentence>,
    pub report: CleaningReport,
}

/// Cleaning stages in the order the pipeline runs them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    CodeCleanup,
    TextCrossCheck,
    ForeignTagStrip,
    Encode,
}

/// Runs code cleanup, then the corpus-global text cross-check, then
/// foreign-tag stripping, and encodes every sentence that still has a
/// target span.
pub fn build_dataset(answers: &[ParsedAnswer], options: &BuildOptions) -> Result<BuiltDataset, EncodingError> {
    build_dataset_traced(answers, options, |_| {})
}

pub(crate) fn build_dataset_traced(
    answers: &[ParsedAnswer],
    options: &BuildOptions,
    mut trace: impl FnMut(Stage),
) -> Result<BuiltDataset, EncodingError> {
    let mut report = CleaningReport::default();
    let mut sentences: Vec<Sentence> = answers.iter().flat_map(ParsedAnswer::sentences).collect();

    trace(Stage::CodeCleanup);
    if let Some(cleaner) = &options.cleaner {
        let (cleaned, r) = clean_code_instances(sentences, cleaner);
        sentences = cleaned;
        report += r;
    }

    trace(Stage::TextCrossCheck);
    if options.cross_check_text {
        let codes = code_content_set(&sentences);
        let (cleaned, r) = clean_text_instances(sentences, &codes);
        sentences = cleaned;
        report += r;
    }

    trace(Stage::ForeignTagStrip);
    let mut stripped = Vec::with_capacity(sentences.len());
    for sentence in sentences {
        if sentence.spans_of(options.target).next().is_none() {
            continue;
        }
        let (s, n) = strip_foreign_tags(sentence, options.target);
        report.foreign_tags_stripped += n;
        stripped.push(s);
    }

    trace(Stage::Encode);
    let encoded = stripped
        .iter()
        .map(|s| encode_bioe(s, options.target))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BuiltDataset {
        sentences: encoded.into_iter().filter(LabeledSentence::has_highlight).collect(),
        report,
    })
}
