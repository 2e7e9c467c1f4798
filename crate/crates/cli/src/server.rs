use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use tower::limit::ConcurrencyLimitLayer;
use tower_http::services::ServeDir;
use tower_http::timeout::TimeoutLayer;

use hiliter_core::service::{self, canonical_json, ModelSet, ServiceError};

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub max_body_bytes: usize,
    pub max_in_flight: usize,
    pub timeout: Duration,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            max_body_bytes: service::DEFAULT_MAX_BODY_BYTES,
            max_in_flight: 32,
            timeout: Duration::from_secs(10),
            static_dir: None,
        }
    }
}

#[derive(Clone)]
struct AppState {
    models: Arc<ModelSet>,
    max_body_bytes: usize,
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], canonical_json(value)).into_response()
}

fn result_response<T: Serialize>(result: Result<T, ServiceError>) -> Response {
    match result {
        Ok(v) => json_response(StatusCode::OK, &v),
        Err(e) => error_response(e),
    }
}

fn error_response(e: ServiceError) -> Response {
    let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    json_response(status, &e)
}

fn rejection(r: BytesRejection) -> ServiceError {
    ServiceError {
        status: r.status().as_u16(),
        error: r.body_text(),
    }
}

async fn run_blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.unwrap_or_else(|e| {
        Err(ServiceError {
            status: 500,
            error: format!("handler failed: {e}"),
        })
    })
}

async fn suggest(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> Response {
    let body = match body {
        Ok(b) => b,
        Err(r) => return error_response(rejection(r)),
    };
    result_response(
        run_blocking(move || service::handle_suggest(&state.models, &body, state.max_body_bytes)).await,
    )
}

async fn render(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> Response {
    let body = match body {
        Ok(b) => b,
        Err(r) => return error_response(rejection(r)),
    };
    result_response(run_blocking(move || service::handle_render(&state.models, &body, state.max_body_bytes)).await)
}

async fn list_models(State(state): State<AppState>) -> Response {
    json_response(StatusCode::OK, &service::handle_models(&state.models))
}

pub fn router(models: ModelSet, options: &ServerOptions) -> Router {
    let state = AppState {
        models: Arc::new(models),
        max_body_bytes: options.max_body_bytes,
    };
    let api = Router::new()
        .route("/api/suggest", post(suggest))
        .route("/api/render", post(render))
        .route("/api/models", get(list_models))
        .route("/healthz", get(|| async { "ok" }))
        .layer(DefaultBodyLimit::max(options.max_body_bytes))
        .with_state(state);
    let app = match &options.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(TimeoutLayer::with_status_code(StatusCode::REQUEST_TIMEOUT, options.timeout))
        .layer(ConcurrencyLimitLayer::new(options.max_in_flight))
}

pub async fn serve(models: ModelSet, addr: SocketAddr, options: ServerOptions) -> Result<()> {
    let app = router(models, &options);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
