//! Drive the session service in-process: create a session, send an
//! utterance and a finding, then export the specification text.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use srw::service::{router, AppState};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Value) -> (u16, String) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(if body.is_null() {
            Body::empty()
        } else {
            Body::from(body.to_string())
        })
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status().as_u16();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8_lossy(&bytes).into_owned())
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let read = |rel: &str| -> Result<Value, Box<dyn std::error::Error>> {
        Ok(serde_json::from_slice(&std::fs::read(corpus.join(rel))?)?)
    };
    let app = router(Arc::new(AppState::new(None)));

    let body = json!({
        "fragment": read("worked_example.json")?,
        "agents": [read("agents/time_expert.json")?],
        "rules": read("patterns.json")?,
    });
    let (status, handle) = call(&app, Method::POST, "/sessions", body).await;
    println!("POST /sessions -> {status} {handle}");
    let id = serde_json::from_str::<Value>(&handle)?["session_id"]
        .as_str()
        .unwrap_or_default()
        .to_string();

    let text = json!({"text": "we need a distributed simulation"});
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/utterance"),
        text,
    )
    .await;
    println!("POST utterance -> {status}");
    let finding = json!({"node": "pdes", "kind": "hard", "state": "implied"});
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/evidence"),
        finding,
    )
    .await;
    println!("POST evidence -> {status}");

    let (_, beliefs) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/beliefs"),
        Value::Null,
    )
    .await;
    println!("beliefs: {beliefs}");
    let (_, spec) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/export"),
        json!({}),
    )
    .await;
    println!("{spec}");
    Ok(())
}
