//! Detect a drop in daily assignment accuracy and decide whether to retrain.

use chrono::NaiveDate;
use issue_triage::monitor::{should_retrain, AccuracySeries, RetrainConfig};
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let noise = Normal::new(0.0, 0.02)?;
    let mut rng = issue_triage::util::rng(3);
    let acc: Vec<f64> = (0..60)
        .map(|day| {
            let level: f64 = if day < 40 { 0.88 } else { 0.80 };
            (level + noise.sample(&mut rng)).clamp(0.0, 1.0)
        })
        .collect();
    let series = AccuracySeries::daily(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), &acc)?;

    let decision = should_retrain(&series, &RetrainConfig::default())?;
    println!("change points: {:?} (penalty {:.5})", decision.change_points, decision.penalty);
    if let Some(d) = decision.last_segment_start {
        println!("last segment starts {d}");
    }
    println!(
        "mean accuracy {:.3} -> {:.3}; retrain: {}",
        decision.previous_mean.unwrap_or(f64::NAN),
        decision.last_mean,
        decision.retrain
    );
    Ok(())
}
