//! Prevalence and instance statistics over a parsed corpus.
//!
//! Per-answer summaries for a format are conditioned on the answer containing
//! that format; the overall per-answer summaries are conditioned on the answer
//! containing any highlight. Words are tokens from [`crate::markup::tokenize`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::format::FormatType;
use crate::markup::ParsedAnswer;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeStats {
    pub instances: usize,
    pub highlighted_words: usize,
    /// Token count of every instance of this type, in document order.
    pub instance_words: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerStats {
    pub post_id: u64,
    pub total_words: usize,
    /// Tokens covered by a span of any type.
    pub highlighted_words_any: usize,
    pub per_type: BTreeMap<FormatType, TypeStats>,
}

impl AnswerStats {
    pub fn is_highlighted(&self) -> bool {
        self.per_type.values().any(|t| t.instances > 0)
    }

    pub fn instances(&self) -> usize {
        self.per_type.values().map(|t| t.instances).sum()
    }
}

pub fn compute_answer_stats(parsed: &ParsedAnswer) -> AnswerStats {
    let mut per_type: BTreeMap<FormatType, TypeStats> =
        FormatType::ALL.iter().map(|&f| (f, TypeStats::default())).collect();
    let mut total_words = 0;
    let mut any = 0;
    for sentence in parsed.sentences() {
        total_words += sentence.tokens.len();
        for token in &sentence.tokens {
            let mut covered_any = false;
            for (format, stats) in per_type.iter_mut() {
                let covered = sentence
                    .spans_of(*format)
                    .any(|s| s.start <= token.start && token.end <= s.end);
                if covered {
                    stats.highlighted_words += 1;
                    covered_any = true;
                }
            }
            any += usize::from(covered_any);
        }
        for span in &sentence.spans {
            let words = sentence
                .tokens
                .iter()
                .filter(|t| span.start <= t.start && t.end <= span.end)
                .count();
            let stats = per_type.get_mut(&span.format).expect("all formats present");
            stats.instances += 1;
            stats.instance_words.push(words);
        }
    }
    AnswerStats {
        post_id: parsed.post_id,
        total_words,
        highlighted_words_any: any,
        per_type,
    }
}

/// Mean, median and maximum of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub count: usize,
}

impl Summary {
    /// Exact summary of a sample; order of `values` does not matter.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Some(Summary {
            mean: sorted.iter().sum::<f64>() / n as f64,
            median,
            max: sorted[n - 1],
            count: n,
        })
    }

    fn of_counts(values: &[usize]) -> Option<Summary> {
        Summary::of(&values.iter().map(|&v| v as f64).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct TypeAccumulator {
    answers: usize,
    instances: usize,
    instances_per_answer: Vec<usize>,
    word_fraction: Vec<f64>,
    instance_words: Vec<usize>,
}

/// Mergeable raw accumulator. Merging partial accumulators in any order and
/// finishing gives the same report as one sequential pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsAccumulator {
    answers: usize,
    highlighted_answers: usize,
    instances_per_answer: Vec<usize>,
    word_fraction: Vec<f64>,
    per_type: BTreeMap<FormatType, TypeAccumulator>,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, stats: &AnswerStats) {
        self.answers += 1;
        if !stats.is_highlighted() {
            return;
        }
        self.highlighted_answers += 1;
        self.instances_per_answer.push(stats.instances());
        self.word_fraction
            .push(fraction(stats.highlighted_words_any, stats.total_words));
        for (format, t) in &stats.per_type {
            if t.instances == 0 {
                continue;
            }
            let acc = self.per_type.entry(*format).or_default();
            acc.answers += 1;
            acc.instances += t.instances;
            acc.instances_per_answer.push(t.instances);
            acc.word_fraction
                .push(fraction(t.highlighted_words, stats.total_words));
            acc.instance_words.extend_from_slice(&t.instance_words);
        }
    }

    pub fn merge(&mut self, other: StatsAccumulator) {
        self.answers += other.answers;
        self.highlighted_answers += other.highlighted_answers;
        self.instances_per_answer.extend(other.instances_per_answer);
        self.word_fraction.extend(other.word_fraction);
        for (format, acc) in other.per_type {
            let mine = self.per_type.entry(format).or_default();
            mine.answers += acc.answers;
            mine.instances += acc.instances;
            mine.instances_per_answer.extend(acc.instances_per_answer);
            mine.word_fraction.extend(acc.word_fraction);
            mine.instance_words.extend(acc.instance_words);
        }
    }

    pub fn finish(&self) -> CorpusReport {
        let total_instances: usize = self.per_type.values().map(|t| t.instances).sum();
        let all_instance_words: Vec<usize> = self
            .per_type
            .values()
            .flat_map(|t| t.instance_words.iter().copied())
            .collect();
        let per_type = FormatType::ALL
            .iter()
            .map(|&format| {
                let acc = self.per_type.get(&format).cloned().unwrap_or_default();
                let report = TypeReport {
                    answers: acc.answers,
                    pct_answers: (self.answers > 0)
                        .then(|| acc.answers as f64 / self.answers as f64),
                    instances: acc.instances,
                    instance_share: (total_instances > 0)
                        .then(|| acc.instances as f64 / total_instances as f64),
                    instances_per_answer: Summary::of_counts(&acc.instances_per_answer),
                    pct_words_highlighted: Summary::of(&acc.word_fraction),
                    words_per_instance: Summary::of_counts(&acc.instance_words),
                };
                (format, report)
            })
            .collect();
        CorpusReport {
            schema_version: REPORT_SCHEMA_VERSION,
            conditioning: CONDITIONING_NOTE.to_string(),
            n_answers: self.answers,
            n_highlighted_answers: self.highlighted_answers,
            pct_highlighted: (self.answers > 0)
                .then(|| self.highlighted_answers as f64 / self.answers as f64),
            total_instances,
            overall: OverallReport {
                instances_per_answer: Summary::of_counts(&self.instances_per_answer),
                pct_words_highlighted: Summary::of(&self.word_fraction),
                words_per_instance: Summary::of_counts(&all_instance_words),
            },
            per_type,
        }
    }

    /// Raw per-answer samples, for CSV export: `(scope, metric, value)`.
    pub fn distributions(&self) -> Vec<(String, &'static str, f64)> {
        let mut rows = Vec::new();
        let mut push_all = |scope: &str, metric: &'static str, values: Vec<f64>| {
            let mut values = values;
            values.sort_by(f64::total_cmp);
            rows.extend(values.into_iter().map(|v| (scope.to_string(), metric, v)));
        };
        push_all(
            "all",
            "instances_per_answer",
            self.instances_per_answer.iter().map(|&v| v as f64).collect(),
        );
        push_all("all", "pct_words_highlighted", self.word_fraction.clone());
        for (format, acc) in &self.per_type {
            let scope = format.name();
            push_all(
                scope,
                "instances_per_answer",
                acc.instances_per_answer.iter().map(|&v| v as f64).collect(),
            );
            push_all(scope, "pct_words_highlighted", acc.word_fraction.clone());
            push_all(
                scope,
                "words_per_instance",
                acc.instance_words.iter().map(|&v| v as f64).collect(),
            );
        }
        rows
    }
}

const CONDITIONING_NOTE: &str = "per-type per-answer summaries are over answers containing that type; \
     overall per-answer summaries are over answers containing any highlight; fractions are in [0, 1]";

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeReport {
    pub answers: usize,
    pub pct_answers: Option<f64>,
    pub instances: usize,
    pub instance_share: Option<f64>,
    pub instances_per_answer: Option<Summary>,
    pub pct_words_highlighted: Option<Summary>,
    pub words_per_instance: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallReport {
    pub instances_per_answer: Option<Summary>,
    pub pct_words_highlighted: Option<Summary>,
    pub words_per_instance: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub schema_version: u32,
    pub conditioning: String,
    pub n_answers: usize,
    pub n_highlighted_answers: usize,
    pub pct_highlighted: Option<f64>,
    pub total_instances: usize,
    pub overall: OverallReport,
    pub per_type: BTreeMap<FormatType, TypeReport>,
}

pub fn aggregate<'a>(stats: impl IntoIterator<Item = &'a AnswerStats>) -> CorpusReport {
    let mut acc = StatsAccumulator::new();
    for s in stats {
        acc.add(s);
    }
    acc.finish()
}
