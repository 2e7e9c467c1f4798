//! Per-format token tagger: hashed lexical embeddings, a stack of windowed
//! maxout layers and a softmax over the four BIOE tags.

pub mod embed;
mod gradcheck;
mod io;
mod network;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bioe::{BioTag, Label, TokenSpan};
use crate::format::FormatType;

pub use crate::bioe::decode_spans;
pub use embed::AttributeRows;
pub use gradcheck::{gradient_check, loss_and_gradient, GradCheckOptions, GradCheckReport, Reduction};
pub use io::{CorruptReason, LoadError, FORMAT_VERSION, MAGIC};
pub use train::{train, BatchSchedule, EpochLog, TrainError, TrainingLog, TrainingParams};

use network::{Layout, Network};

pub const N_LABELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerConfig {
    pub format: FormatType,
    pub embed_dim: usize,
    /// Width of each attribute table row.
    pub attr_dim: usize,
    pub n_layers: usize,
    /// Context tokens on each side per layer.
    pub window: usize,
    pub maxout_pieces: usize,
    pub n_labels: usize,
    pub table_rows: AttributeRows,
    /// Residual connections on every layer after the first.
    pub residual: bool,
    /// Longer sentences are processed in chunks of this many tokens.
    pub max_len: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid labeler config: {0}")]
pub struct ConfigError(pub String);

impl LabelerConfig {
    pub fn new(format: FormatType) -> Self {
        LabelerConfig {
            format,
            embed_dim: 128,
            attr_dim: 32,
            n_layers: 4,
            window: 1,
            maxout_pieces: 3,
            n_labels: N_LABELS,
            table_rows: AttributeRows::default(),
            residual: true,
            max_len: 512,
            seed: 42,
        }
    }

    pub fn window_width(&self) -> usize {
        2 * self.window + 1
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError(m.to_string()));
        if self.format == FormatType::Delete {
            return bad("delete spans are not modeled");
        }
        if self.embed_dim == 0 || self.attr_dim == 0 {
            return bad("dimensions must be positive");
        }
        if self.n_labels != N_LABELS {
            return bad("n_labels must be 4");
        }
        if self.maxout_pieces == 0 || self.maxout_pieces > u8::MAX as usize {
            return bad("maxout_pieces must be in 1..=255");
        }
        if self.table_rows.as_array().contains(&0) {
            return bad("attribute tables need at least one row");
        }
        if self.max_len == 0 {
            return bad("max_len must be positive");
        }
        Ok(())
    }
}

/// How the weights were produced, stored alongside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch_size: u32,
    pub n_sentences: u64,
}

/// A highlighted run predicted by a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedSpan {
    pub start: usize,
    pub end: usize,
    /// Mean probability of the chosen tag over the span's tokens.
    pub confidence: f64,
}

impl PredictedSpan {
    pub fn token_span(&self) -> TokenSpan {
        TokenSpan::new(self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub format: FormatType,
    pub tags: Vec<BioTag>,
    /// One row per token in O, B, I, E order.
    pub probs: Vec<[f64; N_LABELS]>,
    pub spans: Vec<PredictedSpan>,
}

impl Prediction {
    pub fn labels(&self) -> Vec<Label> {
        self.tags
            .iter()
            .map(|&tag| Label {
                tag,
                format: self.format,
            })
            .collect()
    }
}

/// Trained or freshly initialized weights with their config. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelerModel {
    config: LabelerConfig,
    layout: Layout,
    params: Vec<f64>,
    meta: Option<TrainingMeta>,
}

/// Rounds to the nearest f32 so the weights survive a 32-bit round trip.
pub(crate) fn to_f32_grid(v: f64) -> f64 {
    v as f32 as f64
}

impl LabelerModel {
    /// Glorot-uniform weights and zero biases drawn from `config.seed`.
    pub fn new(config: LabelerConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for (range, fans) in layout.blocks(&config) {
            let Some((fan_in, fan_out)) = fans else { continue };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range] {
                *p = to_f32_grid(rng.gen_range(-limit..limit));
            }
        }
        Ok(LabelerModel {
            config,
            layout,
            params,
            meta: None,
        })
    }

    pub(crate) fn from_parts(config: LabelerConfig, params: Vec<f64>, meta: Option<TrainingMeta>) -> Result<Self, ConfigError> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(ConfigError(format!(
                "expected {} parameters, found {}",
                layout.total,
                params.len()
            )));
        }
        Ok(LabelerModel {
            config,
            layout,
            params,
            meta,
        })
    }

    pub fn config(&self) -> &LabelerConfig {
        &self.config
    }

    pub fn format(&self) -> FormatType {
        self.config.format
    }

    pub fn meta(&self) -> Option<&TrainingMeta> {
        self.meta.as_ref()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn network(&self) -> Network<'_> {
        Network {
            cfg: &self.config,
            layout: &self.layout,
            params: &self.params,
        }
    }

    fn chunks<'t>(&self, tokens: &'t [String]) -> impl Iterator<Item = &'t [String]> {
        tokens.chunks(self.config.max_len)
    }

    /// Projected token embeddings, `n × embed_dim`.
    pub fn embed(&self, tokens: &[String]) -> Vec<Vec<f64>> {
        let net = self.network();
        let d = self.config.embed_dim;
        let mut out = Vec::with_capacity(tokens.len());
        for chunk in self.chunks(tokens) {
            let cache = net.forward(net.token_rows(chunk));
            out.extend(cache.activations[0].chunks(d).map(<[f64]>::to_vec));
        }
        out
    }

    /// Per-token probabilities in O, B, I, E order.
    pub fn forward(&self, tokens: &[String]) -> Vec<[f64; N_LABELS]> {
        let net = self.network();
        let mut out = Vec::with_capacity(tokens.len());
        for chunk in self.chunks(tokens) {
            let cache = net.forward(net.token_rows(chunk));
            out.extend(
                cache
                    .probs
                    .chunks(N_LABELS)
                    .map(|row| [row[0], row[1], row[2], row[3]]),
            );
        }
        out
    }

    pub fn predict(&self, tokens: &[String]) -> Prediction {
        let probs = self.forward(tokens);
        let tags: Vec<BioTag> = probs.iter().map(|row| BioTag::from_index(argmax(row))).collect();
        let spans = decode_spans(&tags)
            .into_iter()
            .map(|s| {
                let total: f64 = s.tokens().map(|i| probs[i][tags[i].index()]).sum();
                PredictedSpan {
                    start: s.start,
                    end: s.end,
                    confidence: (total / s.len() as f64).clamp(0.0, 1.0),
                }
            })
            .collect();
        Prediction {
            format: self.config.format,
            tags,
            probs,
            spans,
        }
    }
}

/// Index of the largest value; the first wins ties.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
