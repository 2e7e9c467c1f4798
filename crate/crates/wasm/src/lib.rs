//! Browser bindings. Every export takes and returns plain strings (JSON where
//! structured) so the same functions run natively in tests.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use hiliter_core::bioe::{decode_spans, BioTag, Label};
use hiliter_core::eval::{count_partial_match, micro_metrics};
use hiliter_core::labeler::{train, AttributeRows, LabelerConfig, LabelerModel, TrainingParams};
use hiliter_core::markup::{parse_body, render_html, split_sentences, HighlightSpan, ParseWarning};
use hiliter_core::service::{self, canonical_json, ModelSet, RenderRequest, SuggestRequest};
use hiliter_core::synthetic::code_corpus;
use hiliter_core::FormatType;

#[derive(Serialize)]
struct SentenceView {
    text: String,
    tokens: Vec<String>,
}

#[derive(Serialize)]
struct MarkupView {
    plain_text: String,
    spans: Vec<HighlightSpan>,
    html: String,
    sentences: Vec<SentenceView>,
    warnings: Vec<ParseWarning>,
}

/// Parses answer markup and returns its plain text, spans, a safe HTML
/// rendering and the tokenized sentences.
#[wasm_bindgen]
pub fn markup_view(markup: &str) -> String {
    let parsed = parse_body(markup);
    let sentences = split_sentences(0, &parsed.plain_text, &parsed.spans)
        .into_iter()
        .map(|s| SentenceView {
            tokens: s.tokens.iter().map(|t| t.text.clone()).collect(),
            text: s.text,
        })
        .collect();
    canonical_json(&MarkupView {
        html: render_html(&parsed.plain_text, &parsed.spans),
        plain_text: parsed.plain_text,
        spans: parsed.spans,
        sentences,
        warnings: parsed.warnings,
    })
}

fn parse_tags(labels: &str) -> Result<Vec<BioTag>, String> {
    labels
        .split_whitespace()
        .map(|l| Label::parse(l, FormatType::Code).map(|l| l.tag).map_err(|e| e.to_string()))
        .collect()
}

/// Partial-match scores for two whitespace-separated label sequences such as
/// `"O B-code I-code E-code"`.
#[wasm_bindgen]
pub fn partial_match(gold: &str, predicted: &str) -> Result<String, String> {
    let gold = parse_tags(gold)?;
    let predicted = parse_tags(predicted)?;
    if gold.len() != predicted.len() {
        return Err(format!("{} gold labels but {} predicted", gold.len(), predicted.len()));
    }
    let counts = count_partial_match(&decode_spans(&predicted), &decode_spans(&gold), gold.len())
        .map_err(|e| e.to_string())?;
    Ok(canonical_json(&micro_metrics([counts])))
}

/// A small Code tagger, trained in the page on the synthetic corpus or loaded
/// from a `.hlm` file.
#[wasm_bindgen]
pub struct DemoTagger {
    models: ModelSet,
}

fn demo_config(seed: u64) -> LabelerConfig {
    LabelerConfig {
        embed_dim: 32,
        attr_dim: 16,
        n_layers: 2,
        table_rows: AttributeRows {
            norm: 1024,
            prefix: 512,
            suffix: 512,
            shape: 256,
        },
        seed,
        ..LabelerConfig::new(FormatType::Code)
    }
}

#[wasm_bindgen]
impl DemoTagger {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<DemoTagger, String> {
        let seed = u64::from(seed);
        // the small demo network needs more updates than the full-size defaults
        let params = TrainingParams {
            epochs: 8,
            learning_rate: 0.005,
            seed,
            ..TrainingParams::default()
        };
        let (model, _) = train(&code_corpus(200, seed), demo_config(seed), &params).map_err(|e| e.to_string())?;
        Ok(DemoTagger {
            models: ModelSet::from_models(vec![model]),
        })
    }

    pub fn from_model_bytes(bytes: &[u8]) -> Result<DemoTagger, String> {
        let model = LabelerModel::from_bytes(bytes).map_err(|e| e.to_string())?;
        Ok(DemoTagger {
            models: ModelSet::from_models(vec![model]),
        })
    }

    /// Suggestions for `draft` as the same JSON the HTTP service returns.
    pub fn suggest(&self, draft: &str) -> Result<String, String> {
        let req = SuggestRequest {
            body: draft.to_string(),
            types: None,
            policy: None,
        };
        service::suggest(&self.models, &req)
            .map(|r| canonical_json(&r))
            .map_err(|e| e.error)
    }

    /// `draft` with the suggestions in `accepted_ids` (a JSON array) applied.
    pub fn render(&self, draft: &str, accepted_ids: &str) -> Result<String, String> {
        let ids: Vec<String> = serde_json::from_str(accepted_ids).map_err(|e| e.to_string())?;
        let req = RenderRequest {
            body: draft.to_string(),
            accepted_ids: ids,
        };
        service::render(&self.models, &req)
            .map(|r| r.markdown)
            .map_err(|e| e.error)
    }

    pub fn describe(&self) -> String {
        canonical_json(&service::handle_models(&self.models))
    }
}
