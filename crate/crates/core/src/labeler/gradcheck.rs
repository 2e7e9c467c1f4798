//! Finite-difference check of the analytic gradients.

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::{ForwardCache, Network};
use super::{ConfigError, LabelerConfig, LabelerModel};
use crate::dataset::LabeledSentence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Reduction {
    /// Summed token cross-entropy.
    #[default]
    Sum,
    /// Averaged over the scored tokens.
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub samples_per_block: usize,
    pub reduction: Reduction,
    /// Parameters whose perturbation leaves a maxout unit closer than this to a tie are skipped.
    pub tie_tolerance: f64,
    /// Tokens left out of the loss when `false`.
    pub target_mask: Option<Vec<bool>>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            samples_per_block: 24,
            reduction: Reduction::Sum,
            tie_tolerance: 1e-6,
            target_mask: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    pub skipped_ties: usize,
}

pub(crate) fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

fn targets_of(sample: &LabeledSentence, mask: Option<&[bool]>) -> Vec<Option<usize>> {
    sample
        .tags
        .iter()
        .enumerate()
        .map(|(i, t)| match mask {
            Some(m) if !m.get(i).copied().unwrap_or(true) => None,
            _ => Some(t.index()),
        })
        .collect()
}

fn scale_for(reduction: Reduction, targets: &[Option<usize>]) -> f64 {
    match reduction {
        Reduction::Sum => 1.0,
        Reduction::Mean => 1.0 / targets.iter().flatten().count().max(1) as f64,
    }
}

fn loss_only(cache: &ForwardCache, targets: &[Option<usize>], k: usize) -> f64 {
    targets
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.map(|y| -cache.probs[i * k + y].ln()))
        .sum()
}

/// Loss and its gradient over `samples`, under `reduction` per sentence.
pub fn loss_and_gradient(model: &LabelerModel, samples: &[LabeledSentence], reduction: Reduction) -> (f64, Vec<f64>) {
    let net = model.network();
    let mut grad = vec![0.0; model.n_params()];
    let mut loss = 0.0;
    for s in samples {
        let targets = targets_of(s, None);
        let scale = scale_for(reduction, &targets);
        let cache = net.forward(net.token_rows(&s.tokens));
        loss += scale * net.backward(&cache, &targets, scale, &mut grad);
    }
    (loss, grad)
}

/// Builds a model from `config` and compares analytic and central-difference
/// gradients on a random subset of parameters from every block.
pub fn gradient_check(
    config: &LabelerConfig,
    sample: &LabeledSentence,
    options: &GradCheckOptions,
) -> Result<GradCheckReport, ConfigError> {
    let model = LabelerModel::new(config.clone())?;
    let k = config.n_labels;
    let targets = targets_of(sample, options.target_mask.as_deref());
    let scale = scale_for(options.reduction, &targets);

    let net = model.network();
    let rows = net.token_rows(&sample.tokens);
    let base = net.forward(rows.clone());
    let mut analytic = vec![0.0; model.n_params()];
    net.backward(&base, &targets, scale, &mut analytic);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut candidates = Vec::new();
    for (block, (range, _)) in model.layout.blocks(config).into_iter().enumerate() {
        let pool: Vec<usize> = if block < model.layout.tables.len() {
            let mut used: Vec<usize> = rows.iter().map(|r| r[block]).collect();
            used.sort_unstable();
            used.dedup();
            used.iter()
                .flat_map(|&row| {
                    let start = range.start + row * config.attr_dim;
                    start..start + config.attr_dim
                })
                .collect()
        } else {
            range.collect()
        };
        let take = options.samples_per_block.min(pool.len());
        candidates.extend(sample_indices(&mut rng, pool.len(), take).into_iter().map(|i| pool[i]));
    }

    let mut params = model.params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped_ties: 0,
    };
    for idx in candidates {
        let original = params[idx];
        let h = 1e-4 * original.abs().max(1.0);
        let mut eval = |value: f64| {
            params[idx] = value;
            let net = Network {
                cfg: config,
                layout: &model.layout,
                params: &params,
            };
            let cache = net.forward(rows.clone());
            (loss_only(&cache, &targets, k) * scale, cache)
        };
        let (plus, c_plus) = eval(original + h);
        let (minus, c_minus) = eval(original - h);
        params[idx] = original;
        let tie = [&c_plus, &c_minus]
            .iter()
            .any(|c| c.argmax != base.argmax || c.min_margin < options.tie_tolerance);
        if tie {
            report.skipped_ties += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[idx], numeric);
        report.max_relative_error = report.max_relative_error.max(err);
        report.checked += 1;
    }
    Ok(report)
}
