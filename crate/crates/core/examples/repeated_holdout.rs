//! Repeated 80/20 holdout of all five model kinds on the default synthetic
//! corpus, summarized per partition.
//!
//! ```text
//! cargo run --release --example repeated_holdout -- [repetitions] [report_dir]
//! ```

use issue_triage::corpus::{generate, SynthConfig};
use issue_triage::eval::{run_experiment, ExperimentSpec};
use issue_triage::ocr;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let repetitions = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let d = generate(&SynthConfig::default())?;
    let texts = ocr::inline_texts(&d);

    let spec = ExperimentSpec { repetitions, ..ExperimentSpec::default() };
    let result = run_experiment(&d, &spec, &texts)?;
    print!("{}", result.render_summary());

    if let Some(dir) = args.next() {
        result.write_report(std::path::Path::new(&dir))?;
        println!("report written to {dir}");
    }
    Ok(())
}
