use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, IssueReport};
use crate::models::{AssignmentModel, ModelConfig, ModelError, ModelKind};
use crate::ocr::{self, OcrBackend, OcrError};
use crate::util;

/// Summary statistics of a sample; `std` uses the n-1 denominator and is 0
/// for a single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
    pub median: f64,
}

impl Stats {
    pub fn from_samples(xs: &[f64]) -> Option<Stats> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Some(Stats { n, mean, std, max: sorted[n - 1], min: sorted[0], median })
    }
}

/// Raw per-trial durations in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSamples {
    /// One screenshot per trial, including payload loading.
    pub ocr: Vec<f64>,
    /// Model fitting on OCR text that was extracted beforehand.
    pub training: BTreeMap<ModelKind, Vec<f64>>,
    /// End-to-end assignment of one report with a screenshot; OCR runs
    /// inside the timed region for kinds that read attachments.
    pub response: BTreeMap<ModelKind, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub ocr_time: Option<Stats>,
    pub training_time: BTreeMap<ModelKind, Stats>,
    pub response_time: BTreeMap<ModelKind, Stats>,
}

impl TimingSamples {
    pub fn stats(&self) -> TimingStats {
        let per_kind = |m: &BTreeMap<ModelKind, Vec<f64>>| {
            m.iter()
                .filter_map(|(k, v)| Stats::from_samples(v).map(|s| (*k, s)))
                .collect()
        };
        TimingStats {
            ocr_time: Stats::from_samples(&self.ocr),
            training_time: per_kind(&self.training),
            response_time: per_kind(&self.response),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TimingPlan {
    pub kinds: Vec<ModelKind>,
    pub repetitions: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub model: ModelConfig,
    /// Skip the training measurements (response timing still trains once).
    pub measure_training: bool,
}

impl Default for TimingPlan {
    fn default() -> Self {
        Self {
            kinds: ModelKind::ALL.to_vec(),
            repetitions: 30,
            train_fraction: 0.8,
            seed: 1,
            model: ModelConfig::default(),
            measure_training: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TimingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ocr(#[from] OcrError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error("no report with a screenshot to time")]
    NoScreenshots,
}

/// Times OCR, training and response for each kind. Trials run one after
/// another on the calling thread. `ocr_texts` is the pre-warmed OCR output
/// used for training; response trials call `backend` afresh.
pub fn measure_timings(
    dataset: &Dataset,
    ocr_texts: &BTreeMap<String, String>,
    backend: &dyn OcrBackend,
    plan: &TimingPlan,
) -> Result<TimingSamples, TimingError> {
    let mut samples = TimingSamples::default();
    let mut rng = util::rng(plan.seed);
    let (train, test) = dataset.random_split(plan.train_fraction, plan.seed)?;
    let probes: Vec<&IssueReport> = test.reports().iter().filter(|r| r.has_screenshot()).collect();
    if probes.is_empty() {
        return Err(TimingError::NoScreenshots);
    }

    for _ in 0..plan.repetitions {
        let report = probes.choose(&mut rng).expect("non-empty");
        let shot = report.screenshots().next().expect("has screenshot");
        samples.ocr.push(ocr::extract_uncached(shot, backend)?.duration_s);
    }

    let mut models = BTreeMap::new();
    for &kind in &plan.kinds {
        let reps = if plan.measure_training { plan.repetitions } else { 1 };
        let mut times = Vec::with_capacity(reps);
        for rep in 0..reps {
            let fit_on = if plan.measure_training {
                train.random_split(0.9, util::mix_seed(plan.seed, rep as u64))?.0
            } else {
                train.clone()
            };
            let start = Instant::now();
            let model = AssignmentModel::train(&fit_on, kind, &plan.model, ocr_texts)?;
            times.push(start.elapsed().as_secs_f64());
            if rep + 1 == reps {
                models.insert(kind, model);
            }
        }
        if plan.measure_training {
            samples.training.insert(kind, times);
        }
    }

    for _ in 0..plan.repetitions {
        let report = *probes.choose(&mut rng).expect("non-empty");
        for &kind in &plan.kinds {
            let start = Instant::now();
            respond(&models[&kind], report, backend)?;
            samples.response.entry(kind).or_default().push(start.elapsed().as_secs_f64());
        }
    }
    Ok(samples)
}

/// Assigns `report` from scratch: OCR of its screenshots when the routed
/// model reads attachments, then vectorization and scoring.
pub fn respond(
    model: &AssignmentModel,
    report: &IssueReport,
    backend: &dyn OcrBackend,
) -> Result<crate::models::AssignmentResult, TimingError> {
    let routed = model.routed(report).kind();
    let text = if routed.uses_attachments() {
        let parts = report
            .screenshots()
            .map(|a| ocr::extract_uncached(a, backend).map(|r| r.text))
            .collect::<Result<Vec<_>, _>>()?;
        parts.join("\n")
    } else {
        String::new()
    };
    Ok(model.assign(report, &text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_stats() {
        let s = Stats::from_samples(&[0.5, 0.1, 0.3, 0.2]).unwrap();
        assert!((s.mean - 0.275).abs() < 1e-12);
        // deviations: .225 -.175 .025 -.075 ; squares sum .0875 ; /3
        assert!((s.std - (0.0875f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s.median - 0.25).abs() < 1e-12);
        assert_eq!((s.min, s.max), (0.1, 0.5));
    }

    #[test]
    fn single_and_empty() {
        assert_eq!(Stats::from_samples(&[]), None);
        let s = Stats::from_samples(&[2.0]).unwrap();
        assert_eq!((s.std, s.median), (0.0, 2.0));
    }
}
