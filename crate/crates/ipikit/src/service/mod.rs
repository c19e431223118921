//! HTTP review service: documents, annotations, adjudication and reports.

pub mod config;
pub mod store;

use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ipikit_core::OverlapMode;
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::CorsLayer;

pub use config::ServiceConfig;
pub use store::{AnnotationInput, DecisionInput, LogEntry, Store, StoreError};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct AppState {
    /// Writers take the lock exclusively, which serializes writes.
    pub store: Arc<RwLock<Store>>,
    token: Option<Arc<str>>,
}

impl AppState {
    pub fn new(store: Store, token: Option<String>) -> Self {
        AppState {
            store: Arc::new(RwLock::new(store)),
            token: token.map(Arc::from),
        }
    }
}

impl IntoResponse for StoreError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            StoreError::NotFound(_) => (StatusCode::NOT_FOUND, json!({ "error": self.to_string() })),
            StoreError::Invalid(fields) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": self.to_string(), "fields": fields }),
            ),
            StoreError::Conflict { current, .. } => (
                StatusCode::CONFLICT,
                json!({ "error": self.to_string(), "current_version": current }),
            ),
            StoreError::Persist(_) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({ "error": self.to_string() }),
            ),
        };
        (status, Json(body)).into_response()
    }
}

fn rejection(err: JsonRejection) -> Response {
    let status = match err {
        JsonRejection::JsonDataError(_) => StatusCode::UNPROCESSABLE_ENTITY,
        _ => err.status(),
    };
    (status, Json(json!({ "error": err.body_text() }))).into_response()
}

/// Builds the router with auth and CORS applied.
pub fn router(state: AppState, ui_origin: Option<&str>) -> Result<Router> {
    let mut cors = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]);
    if let Some(origin) = ui_origin {
        let origin = HeaderValue::from_str(origin).map_err(|_| Error::Config(format!("bad ui_origin `{origin}`")))?;
        cors = cors.allow_origin(origin);
    }
    Ok(Router::new()
        .route("/docs", get(list_docs))
        .route("/docs/{id}", get(get_doc))
        .route("/docs/{id}/annotations", post(post_annotation))
        .route("/docs/{id}/decisions", post(post_decision))
        .route("/export/gold", get(export_gold))
        .route("/reports/iaa", get(report_iaa))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .layer(cors)
        .with_state(state))
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_ref()) {
            return (
                StatusCode::UNAUTHORIZED,
                Json(json!({ "error": "missing or invalid bearer token" })),
            )
                .into_response();
        }
    }
    next.run(request).await
}

fn read(state: &AppState) -> std::sync::RwLockReadGuard<'_, Store> {
    state.store.read().unwrap_or_else(|e| e.into_inner())
}

fn write(state: &AppState) -> std::sync::RwLockWriteGuard<'_, Store> {
    state.store.write().unwrap_or_else(|e| e.into_inner())
}

async fn list_docs(State(state): State<AppState>) -> Response {
    Json(read(&state).summaries()).into_response()
}

async fn get_doc(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match read(&state).detail(&id) {
        Ok(detail) => Json(detail).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn post_annotation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: std::result::Result<Json<AnnotationInput>, JsonRejection>,
) -> Response {
    if read(&state).corpus().get(&id).is_none() {
        return StoreError::NotFound(id).into_response();
    }
    let Json(input) = match body {
        Ok(body) => body,
        Err(e) => return rejection(e),
    };
    match write(&state).add_annotation(&id, input) {
        Ok(record) => (StatusCode::CREATED, Json(record)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn post_decision(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: std::result::Result<Json<DecisionInput>, JsonRejection>,
) -> Response {
    if read(&state).corpus().get(&id).is_none() {
        return StoreError::NotFound(id).into_response();
    }
    let Json(input) = match body {
        Ok(body) => body,
        Err(e) => return rejection(e),
    };
    match write(&state).add_decision(&id, input) {
        Ok(decision) => (StatusCode::CREATED, Json(decision)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn export_gold(State(state): State<AppState>) -> Response {
    match read(&state).export_gold() {
        Ok(export) => Json(export).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct IaaQuery {
    #[serde(default)]
    mode: OverlapMode,
}

async fn report_iaa(State(state): State<AppState>, Query(q): Query<IaaQuery>) -> Response {
    match read(&state).iaa(q.mode) {
        Ok(report) => Json(report).into_response(),
        Err(e) => e.into_response(),
    }
}

/// Opens the store described by `config` and returns the ready router.
pub fn app(config: &ServiceConfig) -> Result<Router> {
    let corpus = crate::io::load_corpus(&config.documents)?;
    let store = Store::open(
        corpus,
        &config.annotator_a,
        &config.annotator_b,
        &config.data_dir,
        config.snapshot_every,
    )
    .map_err(|e| match e {
        StoreError::Persist(e) => e,
        other => Error::Usage(other.to_string()),
    })?;
    router(AppState::new(store, config.token.clone()), config.ui_origin.as_deref())
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let app = app(&config)?;
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(|e| Error::Usage(format!("cannot listen on {}: {e}", config.listen)))?;
    eprintln!("ipikit: serving on http://{}", config.listen);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Usage(format!("server error: {e}")))
}
