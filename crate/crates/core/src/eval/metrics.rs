use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{predictions} predictions for {truths} true labels")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("nothing to score")]
    EmptyInput,
    #[error("label `{0}` is not in the class list")]
    UnknownLabel(String),
}

/// Which slice of a test set a report was scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Partition {
    WithScreenshots,
    WithoutScreenshots,
    All,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::WithScreenshots, Partition::WithoutScreenshots, Partition::All];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::WithScreenshots => "with-screenshots",
            Partition::WithoutScreenshots => "without-screenshots",
            Partition::All => "all",
        }
    }

    pub fn contains(self, has_screenshot: bool) -> bool {
        match self {
            Partition::WithScreenshots => has_screenshot,
            Partition::WithoutScreenshots => !has_screenshot,
            Partition::All => true,
        }
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Partition::ALL
            .into_iter()
            .find(|p| p.as_str() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| format!("unknown partition `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True instances of the class.
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub partition: Partition,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub weighted: WeightedMetrics,
    /// `confusion[true][predicted]`, indexed like `per_class`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn score<P: AsRef<str>, T: AsRef<str>, C: AsRef<str>>(
    predictions: &[P],
    truths: &[T],
    class_list: &[C],
    partition: Partition,
) -> Result<EvalReport, MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let labels: Vec<String> = class_list.iter().map(|c| c.as_ref().to_string()).collect();
    let index = |l: &str| {
        labels
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| MetricsError::UnknownLabel(l.to_string()))
    };
    let mut confusion = vec![vec![0usize; labels.len()]; labels.len()];
    for (p, t) in predictions.iter().zip(truths) {
        confusion[index(t.as_ref())?][index(p.as_ref())?] += 1;
    }
    Ok(from_confusion(confusion, &labels, partition))
}

/// Metrics of a square confusion matrix (`[true][predicted]`) with at least
/// one count.
pub fn from_confusion(confusion: Vec<Vec<usize>>, labels: &[String], partition: Partition) -> EvalReport {
    let k = labels.len();
    let n: usize = confusion.iter().flatten().sum();
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c] as f64;
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let recall = if support == 0 { 0.0 } else { tp / support as f64 };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics { label: labels[c].clone(), precision, recall, f1, support, predicted }
        })
        .collect();
    let total = n as f64;
    let weigh = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / total
    };
    let weighted = WeightedMetrics {
        precision: weigh(|m| m.precision),
        recall: weigh(|m| m.recall),
        f1: weigh(|m| m.f1),
    };
    EvalReport {
        partition,
        n,
        correct,
        accuracy: correct as f64 / total,
        per_class,
        weighted,
        confusion,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn all_correct() {
        let t = ["a", "b", "a"];
        let r = score(&t, &t, &["a", "b"], Partition::All).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.weighted, WeightedMetrics { precision: 1.0, recall: 1.0, f1: 1.0 });
    }

    #[test]
    fn all_wrong() {
        let r = score(&["b", "a"], &["a", "b"], &["a", "b"], Partition::All).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.weighted.f1, 0.0);
    }

    #[test]
    fn hand_computed_three_classes() {
        // truth: a a a b b c ; pred: a a b b c c
        let truth = ["a", "a", "a", "b", "b", "c"];
        let pred = ["a", "a", "b", "b", "c", "c"];
        let r = score(&pred, &truth, &["a", "b", "c"], Partition::All).unwrap();
        assert_eq!(r.confusion, vec![vec![2, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]);
        // a: P 1, R 2/3, F 0.8 ; b: P 1/2, R 1/2, F 1/2 ; c: P 1/2, R 1, F 2/3
        let wp = (3.0 * 1.0 + 2.0 * 0.5 + 1.0 * 0.5) / 6.0;
        let wr = (3.0 * (2.0 / 3.0) + 2.0 * 0.5 + 1.0 * 1.0) / 6.0;
        let wf = (3.0 * 0.8 + 2.0 * 0.5 + 1.0 * (2.0 / 3.0)) / 6.0;
        assert!((r.weighted.precision - wp).abs() < 1e-12);
        assert!((r.weighted.recall - wr).abs() < 1e-12);
        assert!((r.weighted.f1 - wf).abs() < 1e-12);
        assert!((r.accuracy - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_predicted_support_means_zero_precision() {
        let r = score(&["a", "a"], &["a", "b"], &["a", "b"], Partition::All).unwrap();
        assert_eq!(r.per_class[1].precision, 0.0);
        assert_eq!(r.per_class[1].f1, 0.0);
    }

    #[test]
    fn errors() {
        let e: [&str; 0] = [];
        assert_eq!(score(&e, &e, &["a"], Partition::All), Err(MetricsError::EmptyInput));
        assert!(matches!(score(&["a"], &["a", "a"], &["a"], Partition::All), Err(MetricsError::LengthMismatch { .. })));
        assert_eq!(
            score(&["z"], &["a"], &["a"], Partition::All),
            Err(MetricsError::UnknownLabel("z".into()))
        );
    }

    proptest! {
        #[test]
        fn invariants(cells in proptest::collection::vec(0usize..6, 16)) {
            prop_assume!(cells.iter().sum::<usize>() > 0);
            let m: Vec<Vec<usize>> = cells.chunks(4).map(|c| c.to_vec()).collect();
            let r = from_confusion(m.clone(), &labels(4), Partition::All);
            let trace: usize = (0..4).map(|i| m[i][i]).sum();
            prop_assert_eq!(r.accuracy, trace as f64 / r.n as f64);
            for (row, c) in m.iter().zip(&r.per_class) {
                prop_assert_eq!(row.iter().sum::<usize>(), c.support);
            }
        }
    }
}
