//! JSON-over-HTTP access to ensembles and comics.
//!
//! Writes to one comic are serialized by a per-comic lock and checked
//! against the `If-Match` revision; reads never take that lock.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use comicforge_core::caption::{TermCache, TermProvider};
use comicforge_core::composer::{ComposeError, EditError};
use comicforge_core::model::parse_ensemble;
use comicforge_core::{
    apply_edit, compose, export_html, export_json, link_terms, ChartEnsemble, ComicDocument, Edit, Params,
    StyleConfig,
};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::store::{Session, Store};

/// Length of the hash prefix used as an ensemble id.
const ENSEMBLE_ID_LEN: usize = 32;

pub struct AppState {
    store: Arc<dyn Store>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    ensembles: RwLock<HashMap<String, Arc<ChartEnsemble>>>,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    terms: Option<Arc<dyn TermProvider>>,
    term_cache: Arc<Mutex<TermCache>>,
}

impl AppState {
    /// `terms` is `None` in offline mode.
    pub fn new(store: Arc<dyn Store>, terms: Option<Arc<dyn TermProvider>>, term_cache: TermCache) -> Self {
        AppState {
            store,
            sessions: RwLock::default(),
            ensembles: RwLock::default(),
            locks: Mutex::default(),
            terms,
            term_cache: Arc::new(Mutex::new(term_cache)),
        }
    }

    fn lock_for(&self, comic_id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .unwrap()
            .entry(comic_id.to_string())
            .or_default()
            .clone()
    }

    fn session(&self, id: &str) -> Result<Option<Arc<Session>>, ApiError> {
        if let Some(s) = self.sessions.read().unwrap().get(id) {
            return Ok(Some(s.clone()));
        }
        let Some(s) = self.store.get_session(id).map_err(ApiError::internal)? else {
            return Ok(None);
        };
        let s = Arc::new(s);
        self.sessions
            .write()
            .unwrap()
            .entry(id.to_string())
            .or_insert(s.clone());
        Ok(Some(s))
    }

    fn ensemble(&self, id: &str) -> Result<Option<Arc<ChartEnsemble>>, ApiError> {
        if let Some(e) = self.ensembles.read().unwrap().get(id) {
            return Ok(Some(e.clone()));
        }
        let Some(doc) = self.store.get_ensemble(id).map_err(ApiError::internal)? else {
            return Ok(None);
        };
        let e = parse_ensemble(&doc.to_string(), None)
            .map_err(ApiError::internal)?
            .ensemble;
        let e = Arc::new(e);
        self.ensembles.write().unwrap().insert(id.to_string(), e.clone());
        Ok(Some(e))
    }

    fn persist(&self, session: Session) -> Result<Arc<Session>, ApiError> {
        self.store.put_session(&session).map_err(ApiError::internal)?;
        let s = Arc::new(session);
        self.sessions
            .write()
            .unwrap()
            .insert(s.comic_id.clone(), s.clone());
        Ok(s)
    }

    /// Adds term links in place and saves any new cache entries.
    fn link(&self, doc: &mut ComicDocument, ensemble: &ChartEnsemble) -> Option<String> {
        let mut cache = self.term_cache.lock().unwrap();
        let err = link_terms(doc, ensemble, self.terms.as_deref(), &mut cache);
        let saved = cache.save().err();
        err.map(|e| e.to_string())
            .or_else(|| saved.map(|e| format!("term cache: {e}")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl ToString) -> Self {
        ApiError {
            status,
            body: json!({ "error": kind, "message": message.to_string() }),
        }
    }

    fn bad_request(message: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what}"))
    }

    fn unprocessable(kind: &str, message: impl ToString) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, kind, message)
    }

    fn internal(message: impl ToString) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn stale(current: u64, message: impl ToString) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            body: json!({
                "error": "stale_revision",
                "message": message.to_string(),
                "current_revision": current,
            }),
        }
    }
}

impl From<EditError> for ApiError {
    fn from(e: EditError) -> Self {
        let kind = match &e {
            EditError::StaleRevision { current, .. } => return ApiError::stale(*current, &e),
            EditError::UnknownEntity(_) => "unknown_entity",
            EditError::OversizedPiece { .. } => "oversized_piece",
            EditError::InvalidEdit(_) => "invalid_edit",
            EditError::EnsembleMismatch => "ensemble_mismatch",
            EditError::Compose(_) => "compose_failed",
        };
        ApiError::unprocessable(kind, e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/ensembles", post(post_ensemble))
        .route("/comics", post(post_comic))
        .route("/comics/{id}", get(get_comic).patch(patch_comic))
        .route("/comics/{id}/export", get(export))
        .route("/comics/{id}/facts/{chart_id}", get(facts))
        .with_state(state)
}

async fn healthz() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(ApiError::bad_request)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

/// Canonical document JSON with the revision as an entity tag.
fn with_revision(status: StatusCode, body: Value, revision: u64) -> Response {
    let mut resp = (status, Json(body)).into_response();
    resp.headers_mut().insert(
        header::ETAG,
        HeaderValue::from_str(&format!("\"{revision}\"")).unwrap(),
    );
    resp
}

fn document_value(doc: &ComicDocument) -> Value {
    serde_json::from_str(&export_json(doc)).expect("exported documents parse")
}

async fn post_ensemble(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let text = std::str::from_utf8(&body).map_err(ApiError::bad_request)?;
    serde_json::from_str::<Value>(text).map_err(ApiError::bad_request)?;
    let loaded = parse_ensemble(text, None).map_err(|e| ApiError::unprocessable("invalid_ensemble", e))?;
    let ensemble = loaded.ensemble;
    let id = ensemble.content_hash()[..ENSEMBLE_ID_LEN].to_string();
    st.store
        .put_ensemble(&id, &ensemble.to_json())
        .map_err(ApiError::internal)?;
    let charts = ensemble.ids();
    st.ensembles.write().unwrap().insert(id.clone(), Arc::new(ensemble));
    let warnings: Vec<String> = loaded.warnings.iter().map(ToString::to_string).collect();
    Ok((
        StatusCode::CREATED,
        Json(json!({ "ensemble_id": id, "charts": charts, "warnings": warnings })),
    )
        .into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewComic {
    ensemble_id: String,
    #[serde(default)]
    params: Params,
    #[serde(default)]
    style: StyleConfig,
}

async fn post_comic(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: NewComic = parse_body(&body)?;
    let ensemble = st
        .ensemble(&req.ensemble_id)?
        .ok_or_else(|| ApiError::not_found("ensemble"))?;
    req.style
        .validate()
        .map_err(|e| ApiError::unprocessable("invalid_style", e))?;
    let state = st.clone();
    let (doc, term_warning) = blocking(move || {
        let mut doc = compose(&ensemble, &req.params)?;
        doc.style = req.style;
        let w = state.link(&mut doc, &ensemble);
        Ok::<_, ComposeError>((doc, w))
    })
    .await?
    .map_err(|e| ApiError::unprocessable("compose_failed", e))?;
    let now = Utc::now();
    let session = st.persist(Session {
        comic_id: uuid::Uuid::new_v4().simple().to_string(),
        ensemble_id: req.ensemble_id,
        created_at: now,
        updated_at: now,
        document: doc,
    })?;
    let mut body = json!({
        "comic_id": session.comic_id,
        "document": document_value(&session.document),
    });
    if let Some(w) = term_warning {
        body["warnings"] = json!([w]);
    }
    Ok(with_revision(StatusCode::CREATED, body, session.document.revision))
}

async fn get_comic(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?.ok_or_else(|| ApiError::not_found("comic"))?;
    Ok(with_revision(StatusCode::OK, document_value(&s.document), s.document.revision))
}

/// Accepts `3`, `"3"` and `W/"3"`.
fn if_match(headers: &HeaderMap) -> Result<u64, ApiError> {
    let raw = headers
        .get(header::IF_MATCH)
        .ok_or_else(|| ApiError::bad_request("If-Match revision header is required"))?
        .to_str()
        .map_err(ApiError::bad_request)?;
    raw.trim()
        .trim_start_matches("W/")
        .trim_matches('"')
        .parse()
        .map_err(|_| ApiError::bad_request(format!("If-Match must be a revision number, got {raw:?}")))
}

async fn patch_comic(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let expected = if_match(&headers)?;
    let edit: Edit = parse_body(&body)?;
    let lock = st.lock_for(&id);
    let _guard = lock.lock().await;
    let session = st.session(&id)?.ok_or_else(|| ApiError::not_found("comic"))?;
    let current = session.document.revision;
    if expected != current {
        return Err(ApiError::stale(
            current,
            format!("stale revision {expected}, document is at {current}"),
        ));
    }
    let ensemble = st
        .ensemble(&session.ensemble_id)?
        .ok_or_else(|| ApiError::internal("ensemble of this comic is missing"))?;
    let state = st.clone();
    let prev = session.clone();
    let next = blocking(move || {
        let mut next = apply_edit(&prev.document, &ensemble, expected, &edit)?;
        state.link(&mut next, &ensemble);
        Ok::<_, EditError>(next)
    })
    .await??;
    let saved = st.persist(Session {
        updated_at: Utc::now(),
        document: next,
        ..(*session).clone()
    })?;
    Ok(with_revision(StatusCode::OK, document_value(&saved.document), saved.document.revision))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult {
    let s = st.session(&id)?.ok_or_else(|| ApiError::not_found("comic"))?;
    let (body, mime) = match q.format.as_deref().unwrap_or("json") {
        "json" => (export_json(&s.document), "application/json"),
        "html" => (export_html(&s.document), "text/html; charset=utf-8"),
        other => return Err(ApiError::bad_request(format!("unknown export format {other:?}"))),
    };
    Ok(([(header::CONTENT_TYPE, mime)], body).into_response())
}

async fn facts(State(st): State<Arc<AppState>>, Path((id, chart_id)): Path<(String, String)>) -> ApiResult {
    let s = st.session(&id)?.ok_or_else(|| ApiError::not_found("comic"))?;
    let panel = s
        .document
        .panel(&chart_id)
        .ok_or_else(|| ApiError::not_found("chart"))?;
    Ok(Json(json!({
        "chart_id": chart_id,
        "revision": s.document.revision,
        "selected": panel.selected,
        "facts": panel.facts,
    }))
    .into_response())
}

