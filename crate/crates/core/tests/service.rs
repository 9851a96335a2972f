use std::collections::HashMap;
use std::path::{Path, PathBuf};

use base64::Engine;
use issue_triage::corpus::{generate, Dataset, SynthConfig};
use issue_triage::models::{save_bundle, AssignmentModel, ModelConfig, ModelKind};
use issue_triage::ocr;
use issue_triage::service::{self, ServiceConfig, ServiceHandle};
use issue_triage::util::sha256_hex;
use serde_json::{json, Value};

fn corpus(seed: u64) -> Dataset {
    generate(&SynthConfig { n_reports: 1200, n_teams: 5, seed, ..SynthConfig::default() }).unwrap()
}

fn write_bundle(d: &Dataset, kind: ModelKind, dir: &Path) -> PathBuf {
    let model = AssignmentModel::train(d, kind, &ModelConfig::default(), &ocr::inline_texts(d)).unwrap();
    let path = dir.join("bundle");
    save_bundle(&model, &path, &d.fingerprint()).unwrap();
    path
}

async fn serve(bundle: &Path, backend: &str) -> (ServiceHandle, String) {
    let mut cfg = ServiceConfig::new(bundle);
    cfg.bind = "127.0.0.1:0".parse().unwrap();
    cfg.backend = backend.into();
    let handle = service::start(cfg).await.unwrap();
    let base = format!("http://{}", handle.addr);
    (handle, base)
}

async fn post(base: &str, body: &Value) -> (u16, Value) {
    let resp = reqwest::Client::new().post(format!("{base}/assign")).json(body).send().await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap())
}

fn strip_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("latency_s");
    v
}

#[tokio::test]
async fn health_and_model_info() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = write_bundle(&corpus(1), ModelKind::Hybrid, dir.path());
    let (handle, base) = serve(&bundle, "inline").await;
    let health: Value = reqwest::get(format!("{base}/health")).await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["fingerprint"], handle.fingerprint());
    assert_eq!(health["kind"], "hybrid");
    let info: Value = reqwest::get(format!("{base}/model")).await.unwrap().json().await.unwrap();
    assert_eq!(info["classes"].as_array().unwrap().len(), 5);
    assert_eq!(info["sub_models"].as_array().unwrap().len(), 2);
    handle.shutdown().await.unwrap();
}

#[tokio::test]
async fn hybrid_routes_on_screenshot_presence() {
    let dir = tempfile::tempdir().unwrap();
    let d = corpus(2);
    let bundle = write_bundle(&d, ModelKind::Hybrid, dir.path());
    let (handle, base) = serve(&bundle, "inline").await;
    let r = &d.reports()[0];
    let plain = json!({ "id": "q1", "summary": r.summary, "description": r.description });
    let (status, v) = post(&base, &plain).await;
    assert_eq!(status, 200);
    assert_eq!(v["routed_to"], "text-only");
    assert_eq!(v["id"], "q1");

    let with_shot = json!({
        "summary": r.summary,
        "description": r.description,
        "attachments": [{ "id": "screen.png", "text": "hata ekrani" }],
    });
    let (status, v) = post(&base, &with_shot).await;
    assert_eq!(status, 200);
    assert_eq!(v["routed_to"], "two-channel-multi");
    assert_eq!(v["model_fingerprint"], handle.fingerprint());

    let log_only = json!({
        "summary": r.summary,
        "description": r.description,
        "attachments": [{ "id": "trace.log", "text": "stack" }],
    });
    assert_eq!(post(&base, &log_only).await.1["routed_to"], "text-only");
    handle.shutdown().await.unwrap();
}

#[tokio::test]
async fn request_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = write_bundle(&corpus(3), ModelKind::Hybrid, dir.path());
    let (handle, base) = serve(&bundle, "inline").await;
    let client = reqwest::Client::new();
    let raw = client
        .post(format!("{base}/assign"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(raw.status().as_u16(), 400);

    let cases = [
        (json!({ "summary": "", "description": "  " }), 422),
        (json!({ "summary": "x", "attachments": [{ "id": "a.png" }] }), 400),
        (json!({ "summary": "x", "attachments": [{ "text": "a", "image_base64": "YQ==" }] }), 400),
        (json!({ "summary": "x", "attachments": [{ "image_base64": "!!not base64!!" }] }), 400),
        (json!({ "summary": "x", "unknown_field": 1 }), 400),
        // the inline backend cannot read image bytes
        (json!({ "summary": "x", "attachments": [{ "image_base64": "iVBORw0K" }] }), 422),
    ];
    for (body, want) in cases {
        let (status, v) = post(&base, &body).await;
        assert_eq!(status, want, "{body} -> {v}");
        assert!(v["error"].is_string());
    }
    handle.shutdown().await.unwrap();
}

#[tokio::test]
async fn image_payloads_go_through_the_backend() {
    let dir = tempfile::tempdir().unwrap();
    let d = corpus(4);
    let bundle = write_bundle(&d, ModelKind::TwoChannelMulti, dir.path());
    let texts = ocr::inline_texts(&d);
    let r = d.reports().iter().find(|r| r.has_screenshot()).unwrap();
    let image = b"\x89PNG fake image bytes".to_vec();
    let fixture = dir.path().join("fixture.jsonl");
    // inline text goes through the backend as well, keyed by its own hash
    let lines = [
        json!({ "hash": sha256_hex(&image), "text": texts[&r.id] }),
        json!({ "hash": sha256_hex(texts[&r.id].as_bytes()), "text": texts[&r.id] }),
    ];
    std::fs::write(&fixture, format!("{}\n{}\n", lines[0], lines[1])).unwrap();

    let (handle, base) = serve(&bundle, &format!("fixture:{}", fixture.display())).await;
    let b64 = base64::engine::general_purpose::STANDARD.encode(&image);
    let via_image = json!({
        "summary": r.summary,
        "description": r.description,
        "attachments": [{ "id": "shot.png", "image_base64": b64 }],
    });
    let via_text = json!({
        "summary": r.summary,
        "description": r.description,
        "attachments": [{ "id": "shot.png", "text": texts[&r.id] }],
    });
    let (s1, a) = post(&base, &via_image).await;
    let (s2, b) = post(&base, &via_text).await;
    assert_eq!((s1, s2), (200, 200));
    assert_eq!(strip_timing(a), strip_timing(b));

    let unknown = json!({ "summary": "x", "attachments": [{ "id": "other.png", "image_base64": "YWJj" }] });
    assert_eq!(post(&base, &unknown).await.0, 500);
    handle.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_identical_requests_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = corpus(5);
    let bundle = write_bundle(&d, ModelKind::Hybrid, dir.path());
    let (handle, base) = serve(&bundle, "stub:5").await;
    let r = d.reports().iter().find(|r| r.has_screenshot()).unwrap();
    let body = json!({
        "summary": r.summary,
        "description": r.description,
        "attachments": [{ "id": "s.png", "text": ocr::inline_texts(&d)[&r.id] }],
    });
    let tasks: Vec<_> = (0..32)
        .map(|_| {
            let (base, body) = (base.clone(), body.clone());
            tokio::spawn(async move { post(&base, &body).await })
        })
        .collect();
    let mut bodies = HashMap::new();
    for t in tasks {
        let (status, v) = t.await.unwrap();
        assert_eq!(status, 200);
        *bodies.entry(strip_timing(v).to_string()).or_insert(0) += 1;
    }
    assert_eq!(bodies.len(), 1);
    handle.shutdown().await.unwrap();
}

#[tokio::test]
async fn reload_swaps_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = write_bundle(&corpus(6), ModelKind::TextOnly, dir.path());
    let (handle, base) = serve(&bundle, "inline").await;
    let before = handle.fingerprint();

    std::fs::write(bundle.join("manifest.json"), "{ broken").unwrap();
    assert!(handle.reload().await.is_err());
    assert_eq!(handle.fingerprint(), before, "failed reload keeps the old bundle");

    write_bundle(&corpus(7), ModelKind::TextOnly, dir.path());
    let after = handle.reload().await.unwrap();
    assert_ne!(after, before);
    let health: Value = reqwest::get(format!("{base}/health")).await.unwrap().json().await.unwrap();
    assert_eq!(health["fingerprint"], after);
    handle.shutdown().await.unwrap();
}
