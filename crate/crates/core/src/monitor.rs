//! Daily accuracy tracking with change-point detection.
//!
//! Segmentation is binary segmentation over squared deviations from segment
//! means. A split is kept when it lowers the cost by more than the penalty,
//! which defaults to `2 ln(n) sigma^2` with sigma estimated robustly from
//! first differences.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_POINTS: usize = 4;
const MIN_SEGMENT: usize = 2;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("series has {0} points; at least {MIN_POINTS} are needed")]
    SeriesTooShort(usize),
    #[error("line {line}: {message}")]
    InvalidPoint { line: usize, message: String },
    #[error("reading series: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub date: NaiveDate,
    pub accuracy: f64,
    pub n: usize,
}

/// Points with strictly increasing dates and accuracies in [0, 1].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccuracySeries {
    points: Vec<SeriesPoint>,
}

impl AccuracySeries {
    pub fn new(points: Vec<SeriesPoint>) -> Result<Self, MonitorError> {
        for (i, p) in points.iter().enumerate() {
            let line = i + 1;
            if !(0.0..=1.0).contains(&p.accuracy) {
                return Err(MonitorError::InvalidPoint { line, message: format!("accuracy {} outside [0, 1]", p.accuracy) });
            }
            if i > 0 && points[i - 1].date >= p.date {
                return Err(MonitorError::InvalidPoint { line, message: "dates must be strictly increasing".into() });
            }
        }
        Ok(Self { points })
    }

    /// Consecutive days starting at `start`, `n` = 0 for every point.
    pub fn daily(start: NaiveDate, accuracies: &[f64]) -> Result<Self, MonitorError> {
        Self::new(
            accuracies
                .iter()
                .zip(start.iter_days())
                .map(|(&accuracy, date)| SeriesPoint { date, accuracy, n: 0 })
                .collect(),
        )
    }

    pub fn points(&self) -> &[SeriesPoint] {
        &self.points
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.accuracy).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One JSON object `{date, accuracy, n}` per line.
    pub fn parse(text: &str) -> Result<Self, MonitorError> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let p: SeriesPoint = serde_json::from_str(line)
                .map_err(|e| MonitorError::InvalidPoint { line: i + 1, message: e.to_string() })?;
            points.push(p);
        }
        Self::new(points)
    }

    pub fn load(path: &Path) -> Result<Self, MonitorError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_jsonl(&self) -> String {
        self.points
            .iter()
            .map(|p| serde_json::to_string(p).expect("serializable") + "\n")
            .collect()
    }
}

/// Cost oracle over prefix sums of the mean-centered series.
struct Costs {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Costs {
    fn new(x: &[f64]) -> Self {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let mut s1 = vec![0.0; x.len() + 1];
        let mut s2 = vec![0.0; x.len() + 1];
        for (i, v) in x.iter().enumerate() {
            let d = v - mean;
            s1[i + 1] = s1[i] + d;
            s2[i + 1] = s2[i] + d * d;
        }
        Self { s1, s2 }
    }

    /// Sum of squared deviations from the mean of `x[a..b]`.
    fn cost(&self, a: usize, b: usize) -> f64 {
        let n = (b - a) as f64;
        let s = self.s1[b] - self.s1[a];
        (self.s2[b] - self.s2[a] - s * s / n).max(0.0)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Robust noise scale: MAD of first differences, rescaled to a normal
/// standard deviation and divided by sqrt(2).
pub fn noise_sigma(x: &[f64]) -> f64 {
    if x.len() < 3 {
        return 0.0;
    }
    let d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let m = median(d.clone());
    let mad = median(d.iter().map(|v| (v - m).abs()).collect());
    mad / 0.674_489_750_196_081_7 / std::f64::consts::SQRT_2
}

pub fn default_penalty(x: &[f64]) -> f64 {
    2.0 * (x.len() as f64).ln() * noise_sigma(x).powi(2)
}

/// Change points of a raw series; each index is the first point of a new
/// segment. `penalty = None` uses [`default_penalty`].
pub fn change_points(x: &[f64], penalty: Option<f64>) -> Result<Vec<usize>, MonitorError> {
    if x.len() < MIN_POINTS {
        return Err(MonitorError::SeriesTooShort(x.len()));
    }
    let penalty = penalty.unwrap_or_else(|| default_penalty(x));
    let costs = Costs::new(x);
    let mut found = Vec::new();
    let mut stack = vec![(0, x.len())];
    while let Some((a, b)) = stack.pop() {
        if b - a < 2 * MIN_SEGMENT {
            continue;
        }
        let whole = costs.cost(a, b);
        let mut best: Option<(usize, f64)> = None;
        for t in a + MIN_SEGMENT..=b - MIN_SEGMENT {
            let gain = whole - costs.cost(a, t) - costs.cost(t, b);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((t, gain));
            }
        }
        if let Some((t, gain)) = best {
            if gain > penalty {
                found.push(t);
                stack.push((a, t));
                stack.push((t, b));
            }
        }
    }
    found.sort_unstable();
    Ok(found)
}

pub fn detect_change_points(series: &AccuracySeries, penalty: Option<f64>) -> Result<Vec<usize>, MonitorError> {
    change_points(&series.accuracies(), penalty)
}

/// Half-open index ranges between consecutive change points.
pub fn segments(len: usize, change_points: &[usize]) -> Vec<(usize, usize)> {
    let mut bounds = vec![0];
    bounds.extend_from_slice(change_points);
    bounds.push(len);
    bounds.windows(2).map(|w| (w[0], w[1])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrainConfig {
    pub penalty: Option<f64>,
    /// Minimum drop in mean accuracy between the last two segments.
    pub drop_threshold: f64,
}

impl Default for RetrainConfig {
    fn default() -> Self {
        Self { penalty: None, drop_threshold: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainDecision {
    pub retrain: bool,
    pub change_points: Vec<usize>,
    pub penalty: f64,
    pub previous_mean: Option<f64>,
    pub last_mean: f64,
    pub last_segment_start: Option<NaiveDate>,
}

pub fn should_retrain(series: &AccuracySeries, config: &RetrainConfig) -> Result<RetrainDecision, MonitorError> {
    let x = series.accuracies();
    let penalty = config.penalty.unwrap_or_else(|| default_penalty(&x));
    let cps = change_points(&x, Some(penalty))?;
    let segs = segments(x.len(), &cps);
    let mean = |(a, b): (usize, usize)| x[a..b].iter().sum::<f64>() / (b - a) as f64;
    let last = *segs.last().expect("at least one segment");
    let last_mean = mean(last);
    let previous_mean = (segs.len() >= 2).then(|| mean(segs[segs.len() - 2]));
    let retrain = previous_mean.is_some_and(|p| p - last_mean > config.drop_threshold);
    Ok(RetrainDecision {
        retrain,
        change_points: cps.clone(),
        penalty,
        previous_mean,
        last_mean,
        last_segment_start: cps.last().map(|&i| series.points()[i].date),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 9, 1).unwrap()
    }

    /// Best single split by exhaustive search with direct cost sums.
    fn brute_best_split(x: &[f64]) -> usize {
        let sse = |s: &[f64]| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        };
        (MIN_SEGMENT..=x.len() - MIN_SEGMENT)
            .min_by(|&a, &b| (sse(&x[..a]) + sse(&x[a..])).total_cmp(&(sse(&x[..b]) + sse(&x[b..]))))
            .unwrap()
    }

    #[test]
    fn constant_series_has_no_change() {
        assert_eq!(change_points(&[0.85; 40], None).unwrap(), Vec::<usize>::new());
        assert_eq!(change_points(&[0.85; 40], Some(0.0)).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn clean_step() {
        let mut x = vec![0.9; 30];
        x.extend(vec![0.7; 30]);
        assert_eq!(brute_best_split(&x), 30);
        assert_eq!(change_points(&x, Some(1e-6)).unwrap(), vec![30]);
        assert_eq!(change_points(&x, Some(f64::INFINITY)).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn too_short() {
        assert!(matches!(change_points(&[0.1, 0.2, 0.3], None), Err(MonitorError::SeriesTooShort(3))));
    }

    #[test]
    fn retrain_decisions() {
        let flat = AccuracySeries::daily(start(), &[0.8; 20]).unwrap();
        assert!(!should_retrain(&flat, &RetrainConfig::default()).unwrap().retrain);

        let mut down = vec![0.88; 20];
        down.extend(vec![0.80; 20]);
        let d = should_retrain(&AccuracySeries::daily(start(), &down).unwrap(), &RetrainConfig::default()).unwrap();
        assert!(d.retrain);
        assert_eq!(d.change_points, vec![20]);
        assert!((d.previous_mean.unwrap() - 0.88).abs() < 1e-12);
        assert!((d.last_mean - 0.80).abs() < 1e-12);

        let up: Vec<f64> = down.iter().rev().copied().collect();
        assert!(!should_retrain(&AccuracySeries::daily(start(), &up).unwrap(), &RetrainConfig::default()).unwrap().retrain);
    }

    #[test]
    fn noisy_shift_is_located() {
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut hits = 0;
        for seed in 0..50 {
            let mut rng = crate::util::rng(seed);
            let x: Vec<f64> = (0..60)
                .map(|i| if i < 30 { 0.88 } else { 0.80 } + noise.sample(&mut rng))
                .collect();
            let cps = change_points(&x, None).unwrap();
            if cps.len() == 1 && cps[0].abs_diff(30) <= 1 {
                hits += 1;
            }
        }
        assert!(hits >= 45, "{hits}/50");
    }

    #[test]
    fn series_validation_and_io() {
        let s = AccuracySeries::daily(start(), &[0.5, 0.6, 0.7, 0.8]).unwrap();
        assert_eq!(AccuracySeries::parse(&s.to_jsonl()).unwrap(), s);
        assert!(AccuracySeries::daily(start(), &[1.5]).is_err());
        let mut p = s.points().to_vec();
        p.swap(0, 1);
        assert!(AccuracySeries::new(p).is_err());
    }

    proptest! {
        #[test]
        fn segments_partition_and_preserve_mean(x in proptest::collection::vec(0.0f64..1.0, 4..80), pen in 0.0f64..0.5) {
            let cps = change_points(&x, Some(pen)).unwrap();
            let segs = segments(x.len(), &cps);
            prop_assert_eq!(segs.first().unwrap().0, 0);
            prop_assert_eq!(segs.last().unwrap().1, x.len());
            let weighted: f64 = segs.iter().map(|&(a, b)| x[a..b].iter().sum::<f64>()).sum::<f64>() / x.len() as f64;
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            prop_assert!((weighted - mean).abs() < 1e-12);
            prop_assert!(segs.iter().all(|&(a, b)| b - a >= MIN_SEGMENT));
        }
    }
}
