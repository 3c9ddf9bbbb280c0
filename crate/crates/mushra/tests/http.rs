mod common;

use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use ultraspeech_mushra::{router, MushraService};

fn app(root: &std::path::Path) -> Router {
    router(Arc::new(Mutex::new(MushraService::open(&common::data_dir(root)).unwrap())))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, Option<String>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let ctype = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, ctype)
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes, _) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn full_listening_session_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::manifest(dir.path(), 4, 5, 1);
    let app = app(dir.path());

    let (status, exp) = call_json(&app, "POST", "/experiments", Some(serde_json::to_value(&manifest).unwrap())).await;
    assert_eq!(status, StatusCode::CREATED);
    let exp_id = exp["id"].as_str().unwrap().to_string();
    assert_eq!(call_json(&app, "GET", &format!("/experiments/{exp_id}"), None).await.1["id"], exp_id);

    let (status, _) = call_json(&app, "GET", &format!("/experiments/{exp_id}/report"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, session) = call_json(&app, "POST", &format!("/experiments/{exp_id}/sessions"), Some(json!({"listener": {"native": false}, "seed": 1}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(session["trials"], 20);
    let sid = session["session_id"].as_str().unwrap().to_string();

    // A session without a body gets a derived seed.
    let (status, other) = call_json(&app, "POST", &format!("/experiments/{exp_id}/sessions"), None).await;
    assert_eq!((status, other["session_id"].as_str().unwrap()), (StatusCode::CREATED, format!("{exp_id}-s2").as_str()));

    for n in 0..20 {
        let (status, next) = call_json(&app, "GET", &format!("/sessions/{sid}/trials/next"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(next["status"], "open");
        let trial = &next["trial"];
        assert_eq!(trial["trial_index"], n);
        let slots = trial["conditions"].as_array().unwrap();
        assert_eq!(slots.len(), common::SYSTEMS.len());

        let (status, wav, ctype) = call(&app, "GET", trial["reference_url"].as_str().unwrap(), None).await;
        assert_eq!((status, ctype.as_deref()), (StatusCode::OK, Some("audio/wav")));
        assert_eq!(&wav[..4], b"RIFF");
        for slot in slots {
            let (status, wav, _) = call(&app, "GET", slot["url"].as_str().unwrap(), None).await;
            assert_eq!(status, StatusCode::OK);
            assert_eq!(&wav[8..12], b"WAVE");
        }

        let scores: serde_json::Map<String, Value> = slots.iter().map(|s| (s["label"].as_str().unwrap().to_string(), json!(100))).collect();
        let uri = format!("/sessions/{sid}/trials/{n}/ratings");
        if n == 0 {
            let mut bad = scores.clone();
            bad.insert("A".into(), json!(101));
            assert_eq!(call_json(&app, "POST", &uri, Some(json!({ "scores": bad }))).await.0, StatusCode::UNPROCESSABLE_ENTITY);
            bad.insert("A".into(), json!(50.5));
            assert_eq!(call_json(&app, "POST", &uri, Some(json!({ "scores": bad }))).await.0, StatusCode::UNPROCESSABLE_ENTITY);
            bad.insert("A".into(), json!("high"));
            assert_eq!(call_json(&app, "POST", &uri, Some(json!({ "scores": bad }))).await.0, StatusCode::UNPROCESSABLE_ENTITY);
            let ahead = format!("/sessions/{sid}/trials/5/ratings");
            assert_eq!(call_json(&app, "POST", &ahead, Some(json!({ "scores": scores }))).await.0, StatusCode::NOT_FOUND);
        }
        let (status, ack) = call_json(&app, "POST", &uri, Some(json!({ "scores": scores }))).await;
        assert_eq!(status, StatusCode::OK);
        let (status, again) = call_json(&app, "POST", &uri, Some(json!({ "scores": scores }))).await;
        assert_eq!((status, &again), (StatusCode::OK, &ack));
        if n == 0 {
            let mut changed = scores.clone();
            changed.insert("B".into(), json!(0));
            let (status, err) = call_json(&app, "POST", &uri, Some(json!({ "scores": changed }))).await;
            assert_eq!((status, err["error"].as_str()), (StatusCode::CONFLICT, Some("conflict")));
            let (status, stored) = call_json(&app, "GET", &uri, None).await;
            assert_eq!(status, StatusCode::OK);
            assert_eq!(stored["scores"], Value::Object(scores.clone()));
        }
    }
    let (_, done) = call_json(&app, "GET", &format!("/sessions/{sid}/trials/next"), None).await;
    assert_eq!(done, json!({"status": "completed"}));
    assert_eq!(call_json(&app, "GET", &format!("/sessions/{sid}"), None).await.1["completed"], true);

    let (status, report) = call_json(&app, "GET", &format!("/experiments/{exp_id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["speakers"].as_array().unwrap().len(), 4);
    for s in report["overall"]["systems"].as_array().unwrap() {
        assert_eq!(s["mean"], 100.0);
    }

    // A restarted server replays the log.
    let restarted = self::app(dir.path());
    let (status, again) = call_json(&restarted, "GET", &format!("/experiments/{exp_id}/report"), None).await;
    assert_eq!((status, again), (StatusCode::OK, report));
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut manifest = common::manifest(dir.path(), 1, 2, 1);
    manifest.utterances[1].conditions.remove("anchor");
    let (status, err) = call_json(&app, "POST", "/experiments", Some(serde_json::to_value(&manifest).unwrap())).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("manifest")));
    assert_eq!(call_json(&app, "GET", "/experiments/exp-0/report", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call_json(&app, "POST", "/experiments/exp-0/sessions", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call_json(&app, "GET", "/sessions/x/trials/next", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/audio/x/0/A", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/nowhere", None).await.0, StatusCode::NOT_FOUND);
}
