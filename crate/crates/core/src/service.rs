//! Transport-free request handlers. The HTTP server and the CLI both call these,
//! so their JSON output is identical.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::format::FormatType;
use crate::labeler::{LabelerModel, TrainingMeta, FORMAT_VERSION};
use crate::markup::ParseWarning;
use crate::recommend::{
    render_markdown, resolve_conflicts, suggest_all, ResolutionMode, ResolutionPolicy, Suggestion,
};

pub const DEFAULT_MAX_BODY_BYTES: usize = 256 * 1024;
pub const MODEL_EXTENSION: &str = "hlm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub embed_dim: usize,
    pub n_layers: usize,
    pub window: usize,
    pub maxout_pieces: usize,
    pub parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub file: String,
    pub format: Option<FormatType>,
    pub version: Option<u32>,
    pub config: Option<ConfigSummary>,
    pub seed: Option<u64>,
    pub training: Option<TrainingMeta>,
    pub warning: Option<String>,
}

impl ModelInfo {
    fn of(file: String, m: &LabelerModel) -> ModelInfo {
        let c = m.config();
        ModelInfo {
            file,
            format: Some(c.format),
            version: Some(FORMAT_VERSION),
            config: Some(ConfigSummary {
                embed_dim: c.embed_dim,
                n_layers: c.n_layers,
                window: c.window,
                maxout_pieces: c.maxout_pieces,
                parameters: m.n_params(),
            }),
            seed: Some(c.seed),
            training: m.meta().cloned(),
            warning: None,
        }
    }

    fn broken(file: String, warning: String) -> ModelInfo {
        ModelInfo {
            file,
            format: None,
            version: None,
            config: None,
            seed: None,
            training: None,
            warning: Some(warning),
        }
    }
}

/// Loaded models, at most one per format, plus a metadata row per file seen.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    models: Vec<LabelerModel>,
    info: Vec<ModelInfo>,
}

impl ModelSet {
    pub fn from_models(models: Vec<LabelerModel>) -> ModelSet {
        let mut set = ModelSet::default();
        for (i, m) in models.into_iter().enumerate() {
            set.add(format!("model-{i}"), m);
        }
        set
    }

    fn add(&mut self, file: String, model: LabelerModel) {
        if self.models.iter().any(|m| m.format() == model.format()) {
            let warning = format!("another {} model is already loaded; skipped", model.format());
            self.info.push(ModelInfo {
                warning: Some(warning),
                ..ModelInfo::of(file, &model)
            });
            return;
        }
        self.info.push(ModelInfo::of(file, &model));
        self.models.push(model);
    }

    /// Every `*.hlm` file in `dir`, in file-name order. Unreadable files become
    /// warning rows instead of errors.
    pub fn load_dir(dir: impl AsRef<Path>) -> io::Result<ModelSet> {
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == MODEL_EXTENSION))
            .collect();
        paths.sort();
        let mut set = ModelSet::default();
        for path in paths {
            let file = path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            match LabelerModel::load(&path) {
                Ok(m) => set.add(file, m),
                Err(e) => set.info.push(ModelInfo::broken(file, e.to_string())),
            }
        }
        Ok(set)
    }

    pub fn models(&self) -> &[LabelerModel] {
        &self.models
    }

    pub fn info(&self) -> &[ModelInfo] {
        &self.info
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestRequest {
    pub body: String,
    #[serde(default)]
    pub types: Option<Vec<String>>,
    #[serde(default)]
    pub policy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuggestResponse {
    pub suggestions: Vec<Suggestion>,
    pub parser_warnings: Vec<ParseWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRequest {
    pub body: String,
    pub accepted_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderResponse {
    pub markdown: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ServiceError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
}

impl ServiceError {
    fn new(status: u16, error: impl Into<String>) -> Self {
        ServiceError {
            status,
            error: error.into(),
        }
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.status, self.error)
    }
}

impl std::error::Error for ServiceError {}

/// Sorted keys, no insignificant whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("response types serialize");
    serde_json::to_string(&v).expect("values serialize")
}

pub fn parse_policy(name: Option<&str>) -> Result<ResolutionPolicy, String> {
    let mode = match name.unwrap_or("highest") {
        "highest" | "highest_confidence" => ResolutionMode::HighestConfidence,
        "all" | "all_with_scores" => ResolutionMode::AllWithScores,
        other => return Err(format!("unknown policy `{other}`")),
    };
    Ok(ResolutionPolicy {
        mode,
        ..ResolutionPolicy::default()
    })
}

fn decode<'a, T: Deserialize<'a>>(raw: &'a [u8], limit: usize) -> Result<T, ServiceError> {
    if raw.len() > limit {
        return Err(ServiceError::new(413, format!("request exceeds {limit} bytes")));
    }
    serde_json::from_slice(raw).map_err(|e| ServiceError::new(400, format!("malformed request: {e}")))
}

/// Suggestions for a draft, resolved under the requested policy.
pub fn suggest(models: &ModelSet, req: &SuggestRequest) -> Result<SuggestResponse, ServiceError> {
    let policy = parse_policy(req.policy.as_deref()).map_err(|e| ServiceError::new(400, e))?;
    let wanted = match &req.types {
        None => None,
        Some(names) => Some(
            names
                .iter()
                .map(|n| n.parse::<FormatType>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ServiceError::new(400, e.to_string()))?,
        ),
    };
    if models.is_empty() {
        return Err(ServiceError::new(503, "no models loaded"));
    }
    let selected: Vec<LabelerModel> = models
        .models()
        .iter()
        .filter(|m| wanted.as_ref().is_none_or(|w| w.contains(&m.format())))
        .cloned()
        .collect();
    if selected.is_empty() {
        let warnings = crate::markup::parse_body(&req.body).warnings;
        return Ok(SuggestResponse {
            suggestions: Vec::new(),
            parser_warnings: warnings,
        });
    }
    let out = suggest_all(&req.body, &selected).map_err(|e| ServiceError::new(503, e.to_string()))?;
    Ok(SuggestResponse {
        suggestions: resolve_conflicts(&out.suggestions, &policy),
        parser_warnings: out.parser_warnings,
    })
}

/// The draft with the accepted suggestions applied. Ids are recomputed from
/// the body, so ids issued for a different body are rejected.
pub fn render(models: &ModelSet, req: &RenderRequest) -> Result<RenderResponse, ServiceError> {
    if req.accepted_ids.is_empty() {
        return Ok(RenderResponse {
            markdown: req.body.clone(),
        });
    }
    if models.is_empty() {
        return Err(ServiceError::new(503, "no models loaded"));
    }
    let all = suggest_all(&req.body, models.models()).map_err(|e| ServiceError::new(503, e.to_string()))?;
    let mut accepted = Vec::with_capacity(req.accepted_ids.len());
    for id in &req.accepted_ids {
        match all.suggestions.iter().find(|s| &s.id == id) {
            Some(s) if !accepted.iter().any(|a: &Suggestion| &a.id == id) => accepted.push(s.clone()),
            Some(_) => {}
            None => return Err(ServiceError::new(409, format!("unknown or stale suggestion id `{id}`"))),
        }
    }
    let markdown = render_markdown(&req.body, &accepted).map_err(|e| ServiceError::new(409, e.to_string()))?;
    Ok(RenderResponse { markdown })
}

pub fn handle_suggest(models: &ModelSet, raw: &[u8], limit: usize) -> Result<SuggestResponse, ServiceError> {
    suggest(models, &decode(raw, limit)?)
}

pub fn handle_render(models: &ModelSet, raw: &[u8], limit: usize) -> Result<RenderResponse, ServiceError> {
    render(models, &decode(raw, limit)?)
}

pub fn handle_models(models: &ModelSet) -> Vec<ModelInfo> {
    models.info().to_vec()
}
