//! Generate a synthetic corpus and print the statistics it was shaped by.
//!
//! ```text
//! cargo run --example synth_corpus -- [n_reports] [out.jsonl]
//! ```

use issue_triage::corpus::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_reports = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10_000);
    let out = args.next();

    let cfg = SynthConfig { n_reports, ..SynthConfig::default() };
    let d = generate(&cfg)?;

    let words = |r: &issue_triage::corpus::IssueReport| {
        (r.summary.split_whitespace().count() + r.description.split_whitespace().count()) as f64
    };
    let (with, without): (Vec<_>, Vec<_>) = d.reports().iter().partition(|r| !r.attachments.is_empty());
    let shots = with.iter().filter(|r| r.has_screenshot()).count();
    let mean = |v: &[&issue_triage::corpus::IssueReport]| v.iter().map(|r| words(r)).sum::<f64>() / v.len() as f64;

    println!("reports               {}", d.len());
    println!("teams                 {}", d.class_list().len());
    println!("with attachments      {:.3}", with.len() as f64 / d.len() as f64);
    println!("  of which screenshot {:.3}", shots as f64 / with.len() as f64);
    println!("words with / without  {:.1} / {:.1}", mean(&with), mean(&without));

    let sample = d.reports().iter().find(|r| r.has_screenshot()).expect("some screenshot");
    println!("\nexample report {} ({})", sample.id, sample.assignee);
    println!("  summary:     {}", sample.summary);
    println!("  description: {}", sample.description);
    for a in sample.screenshots() {
        if let issue_triage::corpus::Content::Text(t) = &a.content {
            println!("  {}: {t}", a.id);
        }
    }

    if let Some(path) = out {
        d.write(std::path::Path::new(&path))?;
        println!("\nwrote {path}");
    }
    Ok(())
}
