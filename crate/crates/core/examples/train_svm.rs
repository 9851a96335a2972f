//! One-vs-rest linear SVM trained by dual coordinate descent, with the
//! per-pass objective trace for one class.

use issue_triage::classifier::{LinearModel, TrainConfig};
use issue_triage::vectorizer::SparseVector;
use rand::Rng;

fn main() {
    let mut rng = issue_triage::util::rng(7);
    let centers = [[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..300 {
        let k = i % 3;
        let v: Vec<f64> = centers[k].iter().map(|c| c + rng.random_range(-1.0..1.0)).collect();
        xs.push(SparseVector::from_dense(&v));
        ys.push(format!("class-{k}"));
    }

    let cfg = TrainConfig { trace: true, max_iter: 5000, ..TrainConfig::default() };
    let model = LinearModel::train(&xs, &ys, &cfg).expect("train");

    let correct = xs.iter().zip(&ys).filter(|(x, y)| model.predict(x).unwrap() == y.as_str()).count();
    println!("training accuracy {}/{}", correct, xs.len());

    for (class, report) in model.classes().iter().zip(&model.metadata().per_class) {
        println!(
            "{class}: {} passes, converged {}, max violation {:.2e}",
            report.passes, report.converged, report.max_violation
        );
    }
    println!("\npass  dual        primal      gap");
    for (i, p) in model.metadata().per_class[0].trace.iter().enumerate().take(10) {
        println!("{:>4}  {:>10.4}  {:>10.4}  {:.2e}", i + 1, p.dual_objective, p.primal_objective, p.gap());
    }
}
