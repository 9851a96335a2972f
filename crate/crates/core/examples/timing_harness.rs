//! OCR, training and response times with a 10 ms stub OCR engine.

use issue_triage::corpus::{generate, SynthConfig};
use issue_triage::eval::{measure_timings, TimingPlan};
use issue_triage::models::ModelKind;
use issue_triage::ocr;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = generate(&SynthConfig { n_reports: 2000, ..SynthConfig::default() })?;
    let texts = ocr::inline_texts(&d);
    let backend = ocr::backend_from_spec("stub:10")?;
    let plan = TimingPlan {
        kinds: vec![ModelKind::TextOnly, ModelKind::TwoChannelMulti, ModelKind::Hybrid],
        repetitions: 30,
        ..TimingPlan::default()
    };
    let stats = measure_timings(&d, &texts, backend.as_ref(), &plan)?.stats();

    let row = |name: &str, s: &issue_triage::eval::Stats| {
        println!(
            "{name:<28} mean {:.4}  std {:.4}  min {:.4}  median {:.4}  max {:.4}",
            s.mean, s.std, s.min, s.median, s.max
        )
    };
    if let Some(s) = &stats.ocr_time {
        row("ocr per screenshot", s);
    }
    for (k, s) in &stats.training_time {
        row(&format!("training {k}"), s);
    }
    for (k, s) in &stats.response_time {
        row(&format!("response {k}"), s);
    }
    Ok(())
}
