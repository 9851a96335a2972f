//! Batch OCR over a corpus with a slow stub backend and a persistent cache.
//! The second run is served entirely from the cache.

use std::time::Instant;

use issue_triage::corpus::{generate, SynthConfig};
use issue_triage::ocr::{self, BatchOptions, OcrCache};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = generate(&SynthConfig { n_reports: 200, ..SynthConfig::default() })?;
    let backend = ocr::backend_from_spec("stub:10")?;
    let dir = tempfile::tempdir()?;
    let cache_path = dir.path().join("ocr-cache.jsonl");

    for round in 1..=2 {
        let cache = OcrCache::open(&cache_path)?;
        let before = cache.len();
        let t = Instant::now();
        let out = ocr::extract_all(&d, backend.as_ref(), &cache, BatchOptions { threads: 8, ..Default::default() })?;
        let non_empty = out.texts.values().filter(|t| !t.is_empty()).count();
        println!(
            "round {round}: {:.2}s, {non_empty} reports with screenshot text, cache {before} -> {}",
            t.elapsed().as_secs_f64(),
            cache.len()
        );
    }

    // A real engine plugs in through a command template, e.g.
    //   cmd:tesseract {input} stdout
    if which("tesseract") {
        println!("tesseract found; try backend `cmd:tesseract {{input}} stdout`");
    }
    Ok(())
}

fn which(bin: &str) -> bool {
    std::env::var_os("PATH")
        .map(|p| std::env::split_paths(&p).any(|d| d.join(bin).is_file()))
        .unwrap_or(false)
}
