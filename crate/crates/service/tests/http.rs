mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use futures_util::StreamExt;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::tempdir;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;
use wrapped_haptics::display::RenderFrame;
use wrapped_haptics::teaching::FeedbackFrame;
use wrapped_haptics_service::http::router;
use wrapped_haptics_service::sessions::logged_frames;

use common::*;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn samples_json(samples: &[wrapped_haptics_service::sessions::PoseSample]) -> Value {
    serde_json::to_value(samples).unwrap()
}

#[tokio::test]
async fn session_routes() {
    let dir = tempdir().unwrap();
    let (service, _) = service(dir.path());
    let app = router(Arc::new(service));

    let (status, body) =
        call_json(&app, "POST", "/sessions", Some(json!({"task": TASK, "feedback": "local", "seed": 3}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = body["id"].as_str().unwrap().to_owned();
    assert_eq!(body["status"], "idle");

    let (status, _) =
        call_json(&app, "POST", "/sessions", Some(json!({"task": "nope", "feedback": "local", "seed": 3}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call_json(&app, "GET", "/sessions/s-unknown", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let first = full_path(100, 0.05);
    let (status, body) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/samples"),
        Some(json!({"demo": 1, "samples": samples_json(&first), "end": true, "client_token": "b1"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["acks"].as_array().unwrap().len(), 100);
    assert_eq!(body["status"], "demo2");

    let (status, body) = call_json(&app, "GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    let (status, _) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/samples"),
        Some(json!({"demo": 1, "samples": samples_json(&full_path(2, 100.0)[1..])})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, body) = call_json(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!((status, body["status"].as_str()), (StatusCode::OK, Some("demo2")));

    let (status, csv) = call(&app, "GET", &format!("/export/{id}?format=csv"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1);
    let (status, jsonl) = call(&app, "GET", &format!("/export/{id}?format=jsonl"), None).await;
    assert_eq!(status, StatusCode::OK);
    let lines = jsonl.iter().filter(|&&b| b == b'\n').count();
    assert_eq!(lines, std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap().lines().count());
    let (status, _) = call(&app, "GET", &format!("/export/{id}?format=xml"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn experiment_routes() {
    let dir = tempdir().unwrap();
    let (service, clock) = service(dir.path());
    let app = router(Arc::new(service));

    let (status, body) =
        call_json(&app, "POST", "/experiments", Some(json!({"kind": "triplet", "seed": 2, "method": "local"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = body["id"].as_str().unwrap().to_owned();
    assert_eq!(body["total"], 48);
    let (status, _) = call_json(&app, "POST", "/experiments", Some(json!({"kind": "triplet", "seed": 2}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let mut pending = body["pending"].clone();
    let mut answered = 0;
    while !pending.is_null() {
        clock.set(pending["ready_at"].as_f64().unwrap() + 1.0);
        let (status, reply) = call_json(
            &app,
            "POST",
            &format!("/experiments/{id}/responses"),
            Some(json!({"trial_id": pending["trial_id"], "answer": "center", "rt": 1.0})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{reply}");
        assert_eq!(reply["flagged"], false);
        pending = reply["next"].clone();
        answered += 1;
        if answered == 1 {
            let (status, _) = call_json(
                &app,
                "POST",
                &format!("/experiments/{id}/responses"),
                Some(json!({"trial_id": reply["trial_id"], "answer": "center", "rt": 1.0})),
            )
            .await;
            assert_eq!(status, StatusCode::CONFLICT);
        }
    }
    assert_eq!(answered, 48);
    let (_, view) = call_json(&app, "GET", &format!("/experiments/{id}"), None).await;
    assert_eq!((view["answered"].as_u64(), view["pending"].is_null()), (Some(48), true));
    let (_, csv) = call(&app, "GET", &format!("/export/{id}?format=csv"), None).await;
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 49);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_streams_render_frames() {
    let dir = tempdir().unwrap();
    let (service, _) = service(dir.path());
    let service = Arc::new(service);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(service.clone());
    tokio::spawn(async move { axum::serve(listener, app).await });

    let req = wrapped_haptics_service::service::CreateSession {
        task: TASK.into(),
        feedback: wrapped_haptics::teaching::FeedbackMode::Local,
        seed: 4,
        client_token: None,
    };
    let id = service.create_session(&req).unwrap().id;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/frames")).await.unwrap();

    let s = service.clone();
    let sid = id.clone();
    let reply = tokio::task::spawn_blocking(move || s.stream_demo(&sid, &batch(1, &full_path(200, 0.01), false, None)))
        .await
        .unwrap()
        .unwrap();
    assert!(reply.frames > 0);

    let logged = logged_frames(&service.events(&id).unwrap());
    for expected in &logged {
        let msg = tokio::time::timeout(std::time::Duration::from_secs(5), ws.next()).await.unwrap().unwrap().unwrap();
        let Message::Text(text) = msg else { panic!("text frame expected") };
        let frame: RenderFrame = serde_json::from_str(&text).unwrap();
        let value: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value.as_object().unwrap().keys().collect::<Vec<_>>(), ["locations", "t"]);
        assert_eq!(&FeedbackFrame::Haptic(frame), expected);
    }
    ws.close(None).await.unwrap();
}
