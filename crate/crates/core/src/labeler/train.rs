use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::embed::N_ATTRIBUTES;
use super::{to_f32_grid, ConfigError, LabelerConfig, LabelerModel, TrainingMeta};
use crate::dataset::LabeledSentence;
use crate::format::FormatType;

/// Batch size as a function of the epoch. Only a constant size is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchSchedule {
    #[default]
    Fixed,
}

impl BatchSchedule {
    pub fn batch_size(&self, base: usize, _epoch: usize) -> usize {
        match self {
            BatchSchedule::Fixed => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Drives the per-epoch shuffle.
    pub seed: u64,
    pub schedule: BatchSchedule,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams {
            epochs: 3,
            learning_rate: 0.001,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 42,
            schedule: BatchSchedule::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Token-weighted mean cross-entropy over the epoch.
    pub mean_loss: f64,
    pub batches: usize,
    pub tokens: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// Sentences longer than `max_len` that were split before training.
    pub split_sentences: usize,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    Empty,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid training parameters: {0}")]
    Params(String),
    #[error("sentence {index} is a {found} example but the model is for {expected}")]
    MixedFormat {
        index: usize,
        expected: FormatType,
        found: FormatType,
    },
    #[error("sentence {index} has {tokens} tokens but {tags} tags")]
    LengthMismatch { index: usize, tokens: usize, tags: usize },
    #[error("loss became {loss} at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize, loss: f64 },
}

impl TrainingParams {
    fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Params(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must be in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

struct Example {
    rows: Vec<[usize; N_ATTRIBUTES]>,
    targets: Vec<Option<usize>>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], hp: &TrainingParams) {
        self.t += 1;
        let c1 = 1.0 - hp.beta1.powi(self.t);
        let c2 = 1.0 - hp.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = hp.beta1 * self.m[i] + (1.0 - hp.beta1) * g;
            self.v[i] = hp.beta2 * self.v[i] + (1.0 - hp.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] = to_f32_grid(params[i] - hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon));
        }
    }
}

/// Trains a fresh model for `config.format` on `data`. Single-threaded and
/// fully determined by the two seeds.
pub fn train(
    data: &[LabeledSentence],
    config: LabelerConfig,
    params: &TrainingParams,
) -> Result<(LabelerModel, TrainingLog), TrainError> {
    params.validate()?;
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    let mut model = LabelerModel::new(config)?;
    let format = model.config.format;
    let max_len = model.config.max_len;

    let mut log = TrainingLog::default();
    let mut examples = Vec::new();
    {
        let net = model.network();
        for (index, s) in data.iter().enumerate() {
            if s.format != format {
                return Err(TrainError::MixedFormat {
                    index,
                    expected: format,
                    found: s.format,
                });
            }
            if s.tokens.len() != s.tags.len() {
                return Err(TrainError::LengthMismatch {
                    index,
                    tokens: s.tokens.len(),
                    tags: s.tags.len(),
                });
            }
            if s.tokens.len() > max_len {
                log.split_sentences += 1;
            }
            for (toks, tags) in s.tokens.chunks(max_len).zip(s.tags.chunks(max_len)) {
                examples.push(Example {
                    rows: net.token_rows(toks),
                    targets: tags.iter().map(|t| Some(t.index())).collect(),
                });
            }
        }
    }
    examples.retain(|e| !e.rows.is_empty());

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut adam = Adam::new(model.params.len());
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let batch_size = params.schedule.batch_size(params.batch_size, epoch);
        let (mut epoch_loss, mut epoch_tokens, mut batches) = (0.0, 0, 0);
        for (batch, idx) in order.chunks(batch_size).enumerate() {
            let tokens: usize = idx.iter().map(|&i| examples[i].rows.len()).sum();
            grad.fill(0.0);
            let mut loss = 0.0;
            {
                let net = model.network();
                let scale = 1.0 / tokens as f64;
                for &i in idx {
                    let ex = &examples[i];
                    let cache = net.forward(ex.rows.clone());
                    loss += net.backward(&cache, &ex.targets, scale, &mut grad);
                }
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch,
                    loss: loss / tokens as f64,
                });
            }
            adam.step(&mut model.params, &grad, params);
            epoch_loss += loss;
            epoch_tokens += tokens;
            batches += 1;
        }
        log.epochs.push(EpochLog {
            epoch,
            mean_loss: epoch_loss / epoch_tokens.max(1) as f64,
            batches,
            tokens: epoch_tokens,
        });
    }

    model.meta = Some(TrainingMeta {
        seed: params.seed,
        epochs: params.epochs as u32,
        learning_rate: params.learning_rate,
        batch_size: params.batch_size as u32,
        n_sentences: data.len() as u64,
    });
    Ok((model, log))
}
