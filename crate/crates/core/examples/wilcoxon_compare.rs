//! Rank-sum tests: a tiny exact case, then accuracy distributions of two
//! model kinds over repeated holdouts.

use issue_triage::corpus::{generate, SynthConfig};
use issue_triage::eval::{run_experiment, wilcoxon_rank_sum, ExperimentSpec, Partition};
use issue_triage::models::ModelKind;
use issue_triage::ocr;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0])?;
    println!("[1,2,3] vs [4,5,6]: W = {}, p = {} ({:?})", t.statistic, t.p_value, t.method);

    let d = generate(&SynthConfig { n_reports: 4000, ..SynthConfig::default() })?;
    let texts = ocr::inline_texts(&d);
    let spec = ExperimentSpec {
        kinds: vec![ModelKind::TextOnly, ModelKind::MergedMulti, ModelKind::TwoChannelMulti],
        repetitions: 12,
        ..ExperimentSpec::default()
    };
    let result = run_experiment(&d, &spec, &texts)?;

    for (a, b) in [
        (ModelKind::TwoChannelMulti, ModelKind::TextOnly),
        (ModelKind::TwoChannelMulti, ModelKind::MergedMulti),
    ] {
        for p in [Partition::WithScreenshots, Partition::All] {
            let t = result.compare(a, b, p)?;
            println!(
                "{a} vs {b} on {p}: W = {:.1}, p = {:.3e} ({:?}){}",
                t.statistic,
                t.p_value,
                t.method,
                if t.significant(0.05) { " *" } else { "" }
            );
        }
    }
    Ok(())
}
