use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use comicforge::{router, AppState, FsStore};
use comicforge_core::caption::TermCache;
use comicforge_core::model::load_ensemble;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(p: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(p)
}

fn app(dir: &Path) -> Router {
    let store = FsStore::open(dir).unwrap();
    router(Arc::new(AppState::new(Arc::new(store), None, TermCache::in_memory())))
}

struct Reply {
    status: StatusCode,
    etag: Option<String>,
    body: Value,
    text: String,
}

async fn call(app: &Router, method: Method, uri: &str, if_match: Option<&str>, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(r) = if_match {
        req = req.header("if-match", r);
    }
    let body = match body {
        Some(v) => Body::from(serde_json::to_vec(&v).unwrap()),
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let etag = resp
        .headers()
        .get("etag")
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let body = serde_json::from_str(&text).unwrap_or(Value::Null);
    Reply { status, etag, body, text }
}

fn marketing_upload() -> Value {
    load_ensemble(&fixture("marketing/ensemble.json"), None)
        .unwrap()
        .ensemble
        .to_json()
}

async fn new_comic(app: &Router) -> (String, Value) {
    let up = call(app, Method::POST, "/ensembles", None, Some(marketing_upload())).await;
    assert_eq!(up.status, StatusCode::CREATED, "{}", up.text);
    let ensemble_id = up.body["ensemble_id"].as_str().unwrap().to_string();
    let made = call(app, Method::POST, "/comics", None, Some(json!({ "ensemble_id": ensemble_id }))).await;
    assert_eq!(made.status, StatusCode::CREATED, "{}", made.text);
    assert_eq!(made.etag.as_deref(), Some("\"0\""));
    (made.body["comic_id"].as_str().unwrap().to_string(), made.body["document"].clone())
}

#[tokio::test]
async fn health_and_generation() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    assert_eq!(call(&app, Method::GET, "/healthz", None, None).await.status, StatusCode::OK);
    let (id, doc) = new_comic(&app).await;
    assert_eq!(doc["pieces"].as_array().unwrap().len(), 4);
    assert_eq!(doc["revision"], 0);
    let got = call(&app, Method::GET, &format!("/comics/{id}"), None, None).await;
    assert_eq!(got.status, StatusCode::OK);
    assert_eq!(got.body, doc);
}

#[tokio::test]
async fn bad_requests_and_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let r = call(&app, Method::POST, "/comics", None, Some(json!({ "ensemble_id": "missing" }))).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = call(&app, Method::POST, "/comics", None, Some(json!({ "nope": 1 }))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, Method::POST, "/ensembles", None, Some(json!({ "charts": [] }))).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(call(&app, Method::GET, "/comics/abc", None, None).await.status, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, Method::GET, "/comics/../etc", None, None).await.status, StatusCode::NOT_FOUND);

    let (id, _) = new_comic(&app).await;
    let uri = format!("/comics/{id}");
    let swap = json!({ "op": "swap_charts", "a": "c1", "b": "c2" });
    let r = call(&app, Method::PATCH, &uri, None, Some(swap.clone())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, Method::PATCH, &uri, Some("zero"), Some(swap.clone())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, Method::PATCH, &uri, Some("0"), Some(json!({ "op": "fly" }))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, Method::PATCH, "/comics/nothing", Some("0"), Some(swap)).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = call(&app, Method::GET, &format!("/comics/{id}/facts/zz"), None, None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn patch_flow() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, _) = new_comic(&app).await;
    let uri = format!("/comics/{id}");

    let ok = call(&app, Method::PATCH, &uri, Some("\"0\""), Some(json!({ "op": "swap_charts", "a": "c1", "b": "c2" }))).await;
    assert_eq!(ok.status, StatusCode::OK, "{}", ok.text);
    assert_eq!(ok.body["revision"], 1);
    assert_eq!(ok.etag.as_deref(), Some("\"1\""));

    let stale = call(&app, Method::PATCH, &uri, Some("0"), Some(json!({ "op": "swap_charts", "a": "c1", "b": "c2" }))).await;
    assert_eq!(stale.status, StatusCode::CONFLICT);
    assert_eq!(stale.body["current_revision"], 1);

    let unknown = call(&app, Method::PATCH, &uri, Some("1"), Some(json!({ "op": "swap_charts", "a": "c1", "b": "zz" }))).await;
    assert_eq!(unknown.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(unknown.body["error"], "unknown_entity");

    let out = call(&app, Method::PATCH, &uri, Some("1"), Some(json!({ "op": "include_charts", "remove": ["c5"] }))).await;
    assert_eq!(out.status, StatusCode::OK, "{}", out.text);
    let big_now = out.body["pieces"]
        .as_array()
        .unwrap()
        .iter()
        .position(|p| p["chart_ids"].as_array().unwrap().len() == 4)
        .unwrap();
    let over = call(
        &app,
        Method::PATCH,
        &uri,
        Some("2"),
        Some(json!({ "op": "include_charts", "add": ["c5"], "target_piece": big_now })),
    )
    .await;
    assert_eq!(over.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(over.body["error"], "oversized_piece");

    let after = call(&app, Method::GET, &uri, None, None).await;
    assert_eq!(after.body["revision"], 2);
}

#[tokio::test]
async fn exports_and_facts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, doc) = new_comic(&app).await;
    let json_export = call(&app, Method::GET, &format!("/comics/{id}/export?format=json"), None, None).await;
    assert_eq!(json_export.status, StatusCode::OK);
    assert_eq!(json_export.body, doc);
    assert!(json_export.text.ends_with("}\n"));
    let html = call(&app, Method::GET, &format!("/comics/{id}/export?format=html"), None, None).await;
    assert_eq!(html.status, StatusCode::OK);
    assert!(html.text.starts_with("<!DOCTYPE html>"));
    assert_eq!(html.text.matches("<section class=\"tier\"").count(), 4);
    let bad = call(&app, Method::GET, &format!("/comics/{id}/export?format=pdf"), None, None).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);

    // c5 is alone in its piece, so every weight is zero.
    let facts = call(&app, Method::GET, &format!("/comics/{id}/facts/c5"), None, None).await;
    assert_eq!(facts.status, StatusCode::OK);
    let list = facts.body["facts"].as_array().unwrap();
    assert!(!list.is_empty());
    assert!(list.iter().all(|f| f["weight"] == 0.0));
    assert!(facts.body["selected"].as_array().unwrap().len() <= 4);
}

#[tokio::test]
async fn mutations_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(dir.path());
    let (id, _) = new_comic(&first).await;
    let uri = format!("/comics/{id}");
    let text = json!({ "op": "edit_caption_text", "chart": "c6", "text": "Written by hand." });
    assert_eq!(call(&first, Method::PATCH, &uri, Some("0"), Some(text)).await.status, StatusCode::OK);
    drop(first);

    let second = app(dir.path());
    let doc = call(&second, Method::GET, &uri, None, None).await.body;
    assert_eq!(doc["revision"], 1);
    let swap = json!({ "op": "swap_charts", "a": "c8", "b": "c9" });
    let r = call(&second, Method::PATCH, &uri, Some("1"), Some(swap)).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let pinned = r.body["pieces"]
        .as_array()
        .unwrap()
        .iter()
        .find_map(|p| p["panels"].get("c6").cloned())
        .unwrap();
    assert_eq!(pinned["caption"]["text"], "Written by hand.");
    assert_eq!(pinned["pinned"], true);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn conflicting_patches_one_wins() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, _) = new_comic(&app).await;
    let uri = format!("/comics/{id}");
    for rev in 0..10u64 {
        let r = rev.to_string();
        let a = call(&app, Method::PATCH, &uri, Some(&r), Some(json!({ "op": "swap_charts", "a": "c1", "b": "c2" })));
        let b = call(&app, Method::PATCH, &uri, Some(&r), Some(json!({ "op": "swap_charts", "a": "c3", "b": "c4" })));
        let (a, b) = tokio::join!(a, b);
        let mut codes = [a.status.as_u16(), b.status.as_u16()];
        codes.sort();
        assert_eq!(codes, [200, 409]);
    }
    let doc = call(&app, Method::GET, &uri, None, None).await.body;
    assert_eq!(doc["revision"], 10);
}
