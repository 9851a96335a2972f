//! Train a bundle, serve it on an ephemeral port and post one request.

use issue_triage::corpus::{generate, SynthConfig};
use issue_triage::models::{save_bundle, AssignmentModel, ModelConfig, ModelKind};
use issue_triage::ocr;
use issue_triage::service::{self, ServiceConfig};
use serde_json::json;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = generate(&SynthConfig { n_reports: 1500, n_teams: 6, ..SynthConfig::default() })?;
    let texts = ocr::inline_texts(&d);
    let model = AssignmentModel::train(&d, ModelKind::Hybrid, &ModelConfig::default(), &texts)?;
    let dir = tempfile::tempdir()?;
    let bundle = dir.path().join("bundle");
    save_bundle(&model, &bundle, &d.fingerprint())?;

    let mut cfg = ServiceConfig::new(&bundle);
    cfg.bind = "127.0.0.1:0".parse()?;
    let handle = service::start(cfg).await?;
    let base = format!("http://{}", handle.addr);
    println!("serving on {base}");

    let client = reqwest::Client::new();
    let health: serde_json::Value = client.get(format!("{base}/health")).send().await?.json().await?;
    println!("health: {health}");

    let r = d.reports().iter().find(|r| r.has_screenshot()).expect("screenshot report");
    let req = json!({
        "id": r.id,
        "summary": r.summary,
        "description": r.description,
        "attachments": [{ "id": "screen.png", "text": texts[&r.id] }],
    });
    let resp: serde_json::Value = client.post(format!("{base}/assign")).json(&req).send().await?.json().await?;
    println!("assign ({} expected): {}", r.assignee, serde_json::to_string_pretty(&resp)?);

    handle.shutdown().await?;
    Ok(())
}
