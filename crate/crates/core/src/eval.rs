//! Token-level partial-match scoring, failure taxonomy and frequency analysis.

use std::collections::{BTreeSet, HashMap};
use std::ops::AddAssign;

use serde::Serialize;
use thiserror::Error;

use crate::bioe::{decode_spans, BioTag, TokenSpan};
use crate::dataset::LabeledSentence;
use crate::format::FormatType;
use crate::labeler::LabelerModel;
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PartialMatchCounts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl AddAssign for PartialMatchCounts {
    fn add_assign(&mut self, o: Self) {
        self.correct += o.correct;
        self.predicted += o.predicted;
        self.gold += o.gold;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("span {start}..{end} outside a {n_tokens}-token sentence")]
    SpanOutOfRange { start: usize, end: usize, n_tokens: usize },
    #[error("{what}: expected {expected} sentences, found {found}")]
    SentenceCount { what: String, expected: usize, found: usize },
    #[error("{what}: sentence {index} has {found} tokens, expected {expected}")]
    TokenCount {
        what: String,
        index: usize,
        expected: usize,
        found: usize,
    },
}

fn token_set(spans: &[TokenSpan], n_tokens: usize) -> Result<Vec<bool>, EvalError> {
    let mut set = vec![false; n_tokens];
    for s in spans {
        if s.start >= s.end || s.end > n_tokens {
            return Err(EvalError::SpanOutOfRange {
                start: s.start,
                end: s.end,
                n_tokens,
            });
        }
        set[s.start..s.end].fill(true);
    }
    Ok(set)
}

/// Tokens covered by both sides, by the prediction, and by the gold spans.
/// Overlapping spans on one side count each token once.
pub fn count_partial_match(
    predicted: &[TokenSpan],
    gold: &[TokenSpan],
    n_tokens: usize,
) -> Result<PartialMatchCounts, EvalError> {
    let p = token_set(predicted, n_tokens)?;
    let g = token_set(gold, n_tokens)?;
    Ok(PartialMatchCounts {
        correct: p.iter().zip(&g).filter(|(a, b)| **a && **b).count(),
        predicted: p.iter().filter(|a| **a).count(),
        gold: g.iter().filter(|a| **a).count(),
    })
}

/// A ratio that reports 0 with a flag when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metric {
    pub value: f64,
    pub undefined: bool,
}

impl Metric {
    fn ratio(num: usize, den: usize) -> Metric {
        if den == 0 {
            Metric {
                value: 0.0,
                undefined: true,
            }
        } else {
            Metric {
                value: num as f64 / den as f64,
                undefined: false,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub counts: PartialMatchCounts,
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
}

/// Sums the counts over the whole stream, then applies the ratios once.
pub fn micro_metrics(counts: impl IntoIterator<Item = PartialMatchCounts>) -> MetricsReport {
    let mut total = PartialMatchCounts::default();
    for c in counts {
        total += c;
    }
    let precision = Metric::ratio(total.correct, total.predicted);
    let recall = Metric::ratio(total.correct, total.gold);
    let (p, r) = (precision.value, recall.value);
    let f1 = if precision.undefined || recall.undefined || p + r == 0.0 {
        Metric {
            value: 0.0,
            undefined: true,
        }
    } else {
        Metric {
            value: 2.0 * p * r / (p + r),
            undefined: false,
        }
    };
    MetricsReport {
        counts: total,
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub format: FormatType,
    pub sentences: usize,
    pub tokens: usize,
    pub metrics: MetricsReport,
}

/// Predicted tags for every sentence of `test`.
pub fn predict_all(model: &LabelerModel, test: &[LabeledSentence]) -> Vec<Vec<BioTag>> {
    test.iter().map(|s| model.predict(&s.tokens).tags).collect()
}

/// Scores `predictions` against the gold tags of `test`.
pub fn score(format: FormatType, test: &[LabeledSentence], predictions: &[Vec<BioTag>]) -> Result<EvaluationReport, EvalError> {
    check_alignment("predictions", test, predictions)?;
    let mut counts = Vec::with_capacity(test.len());
    for (s, pred) in test.iter().zip(predictions) {
        counts.push(count_partial_match(&decode_spans(pred), &s.spans(), s.tokens.len())?);
    }
    Ok(EvaluationReport {
        format,
        sentences: test.len(),
        tokens: test.iter().map(|s| s.tokens.len()).sum(),
        metrics: micro_metrics(counts),
    })
}

pub fn evaluate(model: &LabelerModel, test: &[LabeledSentence]) -> Result<EvaluationReport, EvalError> {
    score(model.format(), test, &predict_all(model, test))
}

fn check_alignment(what: &str, gold: &[LabeledSentence], predictions: &[Vec<BioTag>]) -> Result<(), EvalError> {
    if gold.len() != predictions.len() {
        return Err(EvalError::SentenceCount {
            what: what.to_string(),
            expected: gold.len(),
            found: predictions.len(),
        });
    }
    for (index, (g, p)) in gold.iter().zip(predictions).enumerate() {
        if g.tokens.len() != p.len() {
            return Err(EvalError::TokenCount {
                what: what.to_string(),
                index,
                expected: g.tokens.len(),
                found: p.len(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FailureShares {
    pub misidentification: Option<f64>,
    pub missing_identification: f64,
    pub false_identification: f64,
}

/// Failure counts at one granularity. `misidentification` is `None` when no
/// sibling models were supplied, so it could not be computed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FailureCounts {
    pub misidentification: Option<usize>,
    pub missing_identification: usize,
    pub false_identification: usize,
    pub total: usize,
    /// Percent of `total`.
    pub percentages: FailureShares,
}

impl FailureCounts {
    fn finish(mut self) -> Self {
        self.total = self.misidentification.unwrap_or(0) + self.missing_identification + self.false_identification;
        let pct = |n: usize| {
            if self.total == 0 {
                0.0
            } else {
                100.0 * n as f64 / self.total as f64
            }
        };
        self.percentages = FailureShares {
            misidentification: self.misidentification.map(pct),
            missing_identification: pct(self.missing_identification),
            false_identification: pct(self.false_identification),
        };
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureBreakdown {
    pub format: FormatType,
    /// Every failing token counted once.
    pub tokens: FailureCounts,
    /// Whole instances: a predicted span touching no gold token is a false
    /// identification, a gold span with no predicted token is a miss.
    pub instances: FailureCounts,
    pub compared_with: Vec<FormatType>,
}

fn highlighted(tags: &[BioTag]) -> Vec<bool> {
    tags.iter().map(|t| *t != BioTag::O).collect()
}

/// Splits the target model's errors on its own test set into the three failure
/// families. A missed token that a sibling model highlights is a
/// misidentification.
pub fn categorize_failures(
    target: &[Vec<BioTag>],
    gold: &[LabeledSentence],
    others: &[(FormatType, Vec<Vec<BioTag>>)],
) -> Result<FailureBreakdown, EvalError> {
    let format = gold.first().map(|s| s.format).unwrap_or(FormatType::Code);
    check_alignment("target predictions", gold, target)?;
    for (f, preds) in others {
        check_alignment(&format!("{f} predictions"), gold, preds)?;
    }
    let computed = !others.is_empty();
    let mut tokens = FailureCounts {
        misidentification: computed.then_some(0),
        ..FailureCounts::default()
    };
    let mut instances = tokens.clone();
    let bump = |c: &mut FailureCounts, covered: bool| match (covered, c.misidentification.as_mut()) {
        (true, Some(n)) => *n += 1,
        _ => c.missing_identification += 1,
    };

    for (i, sentence) in gold.iter().enumerate() {
        let pred = highlighted(&target[i]);
        let truth = highlighted(&sentence.tags);
        let sibling: Vec<Vec<bool>> = others.iter().map(|(_, p)| highlighted(&p[i])).collect();
        let covered = |k: usize| sibling.iter().any(|s| s[k]);
        for k in 0..truth.len() {
            match (pred[k], truth[k]) {
                (true, false) => tokens.false_identification += 1,
                (false, true) => bump(&mut tokens, covered(k)),
                _ => {}
            }
        }
        for span in decode_spans(&target[i]) {
            if !span.tokens().any(|k| truth[k]) {
                instances.false_identification += 1;
            }
        }
        for span in sentence.spans() {
            if !span.tokens().any(|k| pred[k]) {
                bump(&mut instances, span.tokens().any(covered));
            }
        }
    }
    Ok(FailureBreakdown {
        format,
        tokens: tokens.finish(),
        instances: instances.finish(),
        compared_with: others.iter().map(|(f, _)| *f).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordFrequency {
    pub word: String,
    pub train_frequency: usize,
    pub correct: usize,
    pub missed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencySummary {
    pub mean: f64,
    pub median: f64,
    pub tokens: usize,
}

impl FrequencySummary {
    fn of(values: &[f64]) -> Option<Self> {
        Summary::of(values).map(|s| FrequencySummary {
            mean: s.mean,
            median: s.median,
            tokens: s.count,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub format: FormatType,
    /// Over gold highlighted tokens the model also highlighted.
    pub correct: Option<FrequencySummary>,
    /// Over gold highlighted tokens the model left as O.
    pub missed: Option<FrequencySummary>,
    /// One row per distinct lowercased word, most frequent in training first.
    pub words: Vec<WordFrequency>,
}

impl FrequencyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("word,train_frequency,correct,missed\n");
        for w in &self.words {
            let word = if w.word.contains([',', '"', '\n']) {
                format!("\"{}\"", w.word.replace('"', "\"\""))
            } else {
                w.word.clone()
            };
            out.push_str(&format!("{word},{},{},{}\n", w.train_frequency, w.correct, w.missed));
        }
        out
    }
}

/// How often each gold highlighted test token was highlighted in training,
/// split by whether the model recovered it.
pub fn frequency_analysis(
    train: &[LabeledSentence],
    test: &[LabeledSentence],
    predictions: &[Vec<BioTag>],
) -> Result<FrequencyReport, EvalError> {
    check_alignment("predictions", test, predictions)?;
    let mut train_freq: HashMap<String, usize> = HashMap::new();
    for s in train {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            if *tag != BioTag::O {
                *train_freq.entry(tok.to_lowercase()).or_default() += 1;
            }
        }
    }
    let mut per_word: HashMap<String, (usize, usize)> = HashMap::new();
    let (mut correct, mut missed) = (Vec::new(), Vec::new());
    for (s, pred) in test.iter().zip(predictions) {
        for ((tok, tag), p) in s.tokens.iter().zip(&s.tags).zip(pred) {
            if *tag == BioTag::O {
                continue;
            }
            let word = tok.to_lowercase();
            let freq = train_freq.get(&word).copied().unwrap_or(0) as f64;
            let entry = per_word.entry(word).or_default();
            if *p != BioTag::O {
                correct.push(freq);
                entry.0 += 1;
            } else {
                missed.push(freq);
                entry.1 += 1;
            }
        }
    }
    let vocab: BTreeSet<&String> = train_freq.keys().chain(per_word.keys()).collect();
    let mut words: Vec<WordFrequency> = vocab
        .into_iter()
        .map(|w| {
            let (c, m) = per_word.get(w).copied().unwrap_or_default();
            WordFrequency {
                word: w.clone(),
                train_frequency: train_freq.get(w).copied().unwrap_or(0),
                correct: c,
                missed: m,
            }
        })
        .collect();
    words.sort_by(|a, b| b.train_frequency.cmp(&a.train_frequency).then_with(|| a.word.cmp(&b.word)));
    Ok(FrequencyReport {
        format: test.first().map(|s| s.format).unwrap_or(FormatType::Code),
        correct: FrequencySummary::of(&correct),
        missed: FrequencySummary::of(&missed),
        words,
    })
}
