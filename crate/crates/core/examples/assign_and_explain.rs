//! Train the hybrid model, assign a few held-out reports and show why.

use issue_triage::corpus::{generate, SynthConfig};
use issue_triage::models::{AssignmentModel, ModelConfig, ModelKind};
use issue_triage::ocr;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = generate(&SynthConfig { n_reports: 3000, n_teams: 8, ..SynthConfig::default() })?;
    let texts = ocr::inline_texts(&d);
    let (train, test) = d.random_split(0.8, 1)?;

    let model = AssignmentModel::train(&train, ModelKind::Hybrid, &ModelConfig::default(), &texts)?;

    for r in test.reports().iter().take(4) {
        let text = &texts[&r.id];
        let result = model.assign(r, text)?;
        println!(
            "{} true {} -> {} via {} ({} screenshot(s))",
            r.id,
            r.assignee,
            result.team,
            result.routed_to,
            r.screenshots().count()
        );
        for c in model.explain(r, text, &result, 3) {
            println!("    {:>8.4}  {:<10} {:?}", c.contribution, format!("{:?}", c.channel), c.term);
        }
        let bias = model.bias_for(r, &result).unwrap_or(0.0);
        let total: f64 = model.all_contributions(r, text, &result).iter().map(|c| c.contribution).sum();
        println!("    sum {:.6} + bias {:.6} = score {:.6}", total, bias, result.score_of(&result.team).unwrap());
    }
    Ok(())
}
