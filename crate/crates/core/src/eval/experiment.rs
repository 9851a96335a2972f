use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Months, NaiveDate, Utc};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{self, EvalReport, MetricsError, Partition};
use super::timing::Stats;
use super::wilcoxon::{self, RankSumTest, WilcoxonError};
use crate::corpus::{CorpusError, Dataset};
use crate::models::{AssignmentModel, ModelConfig, ModelError, ModelKind, SingleModel};
use crate::util;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Wilcoxon(#[from] WilcoxonError),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("kind {0} was not part of the experiment")]
    MissingKind(ModelKind),
    #[error("writing report: {0}")]
    Io(#[from] std::io::Error),
}

/// How each repetition picks its train and test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Window {
    /// Fresh seeded random split of the whole dataset.
    Random,
    /// Fixed test month (`YYYY-MM`); training reports are drawn without
    /// replacement from the `lookback_months` before it until the train set
    /// is `train_fraction / (1 - train_fraction)` times the test set.
    FixedTest {
        test_month: String,
        #[serde(default = "default_lookback")]
        lookback_months: u32,
    },
}

fn default_lookback() -> u32 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub kinds: Vec<ModelKind>,
    pub repetitions: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub window: Window,
    pub model: ModelConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            kinds: ModelKind::ALL.to_vec(),
            repetitions: 30,
            train_fraction: 0.8,
            seed: 1,
            window: Window::Random,
            model: ModelConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidSpec(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        if self.kinds.is_empty() {
            return bad("no model kinds".into());
        }
        if let Window::FixedTest { test_month, .. } = &self.window {
            month_bounds(test_month)?;
        }
        self.model.train.validate().map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
        self.model.prep.validate().map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
        Ok(())
    }

    pub fn describe_window(&self) -> String {
        match &self.window {
            Window::Random => format!(
                "random split per repetition, train fraction {}",
                self.train_fraction
            ),
            Window::FixedTest { test_month, lookback_months } => format!(
                "fixed test month {test_month}; training sampled without replacement from the \
                 preceding {lookback_months} months until train = {:.2} x test",
                self.train_fraction / (1.0 - self.train_fraction)
            ),
        }
    }
}

fn month_bounds(month: &str) -> Result<(DateTime<Utc>, DateTime<Utc>), ExperimentError> {
    let start = NaiveDate::parse_from_str(&format!("{month}-01"), "%Y-%m-%d")
        .map_err(|e| ExperimentError::InvalidSpec(format!("test_month `{month}`: {e}")))?
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc();
    Ok((start, start + Months::new(1)))
}

/// Train and test sets for repetition `rep`.
pub fn split_for(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    rep: usize,
) -> Result<(Dataset, Dataset), ExperimentError> {
    let seed = util::mix_seed(spec.seed, rep as u64);
    match &spec.window {
        Window::Random => Ok(dataset.random_split(spec.train_fraction, seed)?),
        Window::FixedTest { test_month, lookback_months } => {
            let (start, end) = month_bounds(test_month)?;
            let pool_start = start - Months::new(*lookback_months);
            let test = dataset.subset(|r| r.created_at >= start && r.created_at < end);
            let pool: Vec<usize> = dataset
                .reports()
                .iter()
                .enumerate()
                .filter(|(_, r)| r.created_at >= pool_start && r.created_at < start)
                .map(|(i, _)| i)
                .collect();
            let ratio = spec.train_fraction / (1.0 - spec.train_fraction);
            let target = (test.len() as f64 * ratio + 0.5).floor() as usize;
            if pool.len() < target {
                log::warn!(
                    "training pool has {} reports, fewer than the {target} requested",
                    pool.len()
                );
            }
            let mut order = pool;
            order.shuffle(&mut util::rng(seed));
            let keep: BTreeSet<usize> = order.into_iter().take(target).collect();
            let ids: BTreeSet<&str> = keep.iter().map(|&i| dataset.reports()[i].id.as_str()).collect();
            let train = dataset.subset(|r| ids.contains(r.id.as_str()));
            if train.is_empty() {
                return Err(CorpusError::EmptySide(crate::corpus::Side::Train).into());
            }
            if test.is_empty() {
                return Err(CorpusError::EmptySide(crate::corpus::Side::Test).into());
            }
            Ok((train, test))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindOutcome {
    /// Fingerprint of the report ids this kind was trained on.
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    /// `None` when the partition has no test reports.
    pub partitions: BTreeMap<Partition, Option<EvalReport>>,
}

impl KindOutcome {
    pub fn report(&self, p: Partition) -> Option<&EvalReport> {
        self.partitions.get(&p).and_then(Option::as_ref)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub empty_partitions: Vec<Partition>,
    pub kinds: BTreeMap<ModelKind, KindOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kind: ModelKind,
    pub partition: Partition,
    pub metric: String,
    /// Repetitions in which the partition was empty.
    pub empty_repetitions: usize,
    pub stats: Option<Stats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub dataset_fingerprint: String,
    pub repetitions: Vec<RepetitionResult>,
    pub summary: Vec<SummaryRow>,
}

/// Runs every repetition of `spec`. All kinds of one repetition share the
/// same split; a requested Hybrid reuses the two-channel and text-only
/// models of that repetition. `ocr_texts` is the screenshot text per report
/// (see [`crate::ocr::extract_all`]).
pub fn run_experiment(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    ocr_texts: &BTreeMap<String, String>,
) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let dataset = dataset.filter_resolved();
    let repetitions = (0..spec.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(&dataset, spec, rep, ocr_texts))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = summarize(&spec.kinds, &repetitions);
    Ok(ExperimentResult {
        spec: spec.clone(),
        dataset_fingerprint: dataset.fingerprint(),
        repetitions,
        summary,
    })
}

fn base_kinds(kinds: &[ModelKind]) -> BTreeSet<ModelKind> {
    let mut base: BTreeSet<ModelKind> = kinds.iter().copied().filter(|&k| k != ModelKind::Hybrid).collect();
    if kinds.contains(&ModelKind::Hybrid) {
        base.insert(ModelKind::TwoChannelMulti);
        base.insert(ModelKind::TextOnly);
    }
    base
}

fn run_repetition(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    rep: usize,
    ocr_texts: &BTreeMap<String, String>,
) -> Result<RepetitionResult, ExperimentError> {
    let seed = util::mix_seed(spec.seed, rep as u64);
    let (train, test) = split_for(dataset, spec, rep)?;
    let train_fp = train.id_fingerprint();
    let test_fp = test.id_fingerprint();
    let mut config = spec.model.clone();
    config.train.seed = seed;

    let trained = base_kinds(&spec.kinds)
        .into_par_iter()
        .map(|k| Ok((k, AssignmentModel::train(&train, k, &config, ocr_texts)?)))
        .collect::<Result<BTreeMap<ModelKind, AssignmentModel>, ModelError>>()?;
    let single = |k: ModelKind| -> SingleModel {
        match &trained[&k] {
            AssignmentModel::Single(m) => m.clone(),
            AssignmentModel::Hybrid { .. } => unreachable!("base kinds are single models"),
        }
    };

    let mut empty = Vec::new();
    let with: Vec<bool> = test.reports().iter().map(|r| r.has_screenshot()).collect();
    for p in Partition::ALL {
        if !with.iter().any(|&h| p.contains(h)) {
            empty.push(p);
        }
    }

    let mut kinds = BTreeMap::new();
    for &kind in &spec.kinds {
        let hybrid;
        let model = if kind == ModelKind::Hybrid {
            hybrid = AssignmentModel::hybrid(single(ModelKind::TwoChannelMulti), single(ModelKind::TextOnly));
            &hybrid
        } else {
            &trained[&kind]
        };
        let predictions = test
            .reports()
            .iter()
            .map(|r| {
                let text = ocr_texts.get(&r.id).map(String::as_str).unwrap_or("");
                model.assign(r, text).map(|a| a.team)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut partitions = BTreeMap::new();
        for p in Partition::ALL {
            let (pred, truth): (Vec<&str>, Vec<&str>) = test
                .reports()
                .iter()
                .zip(&predictions)
                .zip(&with)
                .filter(|(_, &h)| p.contains(h))
                .map(|((r, pr), _)| (pr.as_str(), r.assignee.as_str()))
                .unzip();
            let report = if pred.is_empty() {
                None
            } else {
                Some(metrics::score(&pred, &truth, dataset.class_list(), p)?)
            };
            partitions.insert(p, report);
        }
        kinds.insert(
            kind,
            KindOutcome { train_fingerprint: train_fp.clone(), test_fingerprint: test_fp.clone(), partitions },
        );
    }
    Ok(RepetitionResult {
        repetition: rep,
        seed,
        n_train: train.len(),
        n_test: test.len(),
        train_fingerprint: train_fp,
        test_fingerprint: test_fp,
        empty_partitions: empty,
        kinds,
    })
}

fn summarize(kinds: &[ModelKind], reps: &[RepetitionResult]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &kind in kinds {
        for p in Partition::ALL {
            for (metric, get) in [
                ("accuracy", (|r: &EvalReport| r.accuracy) as fn(&EvalReport) -> f64),
                ("weighted_f1", |r: &EvalReport| r.weighted.f1),
            ] {
                let values: Vec<f64> = reps.iter().filter_map(|r| r.kinds[&kind].report(p).map(get)).collect();
                rows.push(SummaryRow {
                    kind,
                    partition: p,
                    metric: metric.to_string(),
                    empty_repetitions: reps.len() - values.len(),
                    stats: Stats::from_samples(&values),
                });
            }
        }
    }
    rows
}

impl ExperimentResult {
    /// Per-repetition accuracies, skipping repetitions where the partition
    /// was empty.
    pub fn accuracies(&self, kind: ModelKind, partition: Partition) -> Result<Vec<f64>, ExperimentError> {
        if !self.spec.kinds.contains(&kind) {
            return Err(ExperimentError::MissingKind(kind));
        }
        Ok(self
            .repetitions
            .iter()
            .filter_map(|r| r.kinds[&kind].report(partition).map(|e| e.accuracy))
            .collect())
    }

    pub fn summary_for(&self, kind: ModelKind, partition: Partition, metric: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.kind == kind && r.partition == partition && r.metric == metric)
    }

    /// Rank-sum test of the accuracy distributions of `a` and `b`.
    pub fn compare(&self, a: ModelKind, b: ModelKind, partition: Partition) -> Result<RankSumTest, ExperimentError> {
        Ok(wilcoxon::wilcoxon_rank_sum(&self.accuracies(a, partition)?, &self.accuracies(b, partition)?)?)
    }

    /// Plain-text summary table.
    pub fn render_summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# dataset {}", self.dataset_fingerprint);
        let _ = writeln!(out, "# {} repetitions, base seed {}", self.spec.repetitions, self.spec.seed);
        let _ = writeln!(out, "# {}", self.spec.describe_window());
        let _ = writeln!(
            out,
            "{:<18} {:<20} {:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6}",
            "kind", "partition", "metric", "mean", "std", "max", "min", "median", "empty"
        );
        for r in &self.summary {
            let cols = match &r.stats {
                Some(s) => format!(
                    "{:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                    s.mean, s.std, s.max, s.min, s.median
                ),
                None => format!("{:>8} {:>8} {:>8} {:>8} {:>8}", "-", "-", "-", "-", "-"),
            };
            let _ = writeln!(
                out,
                "{:<18} {:<20} {:<12} {cols} {:>6}",
                r.kind.as_str(),
                r.partition.as_str(),
                r.metric,
                r.empty_repetitions
            );
        }
        out
    }

    /// One JSON object per (repetition, kind, partition).
    pub fn repetition_rows(&self) -> String {
        let mut out = String::new();
        for rep in &self.repetitions {
            for (kind, o) in &rep.kinds {
                for (p, report) in &o.partitions {
                    let row = serde_json::json!({
                        "repetition": rep.repetition,
                        "kind": kind,
                        "partition": p,
                        "n": report.as_ref().map(|r| r.n),
                        "accuracy": report.as_ref().map(|r| r.accuracy),
                        "weighted_precision": report.as_ref().map(|r| r.weighted.precision),
                        "weighted_recall": report.as_ref().map(|r| r.weighted.recall),
                        "weighted_f1": report.as_ref().map(|r| r.weighted.f1),
                        "train_fingerprint": o.train_fingerprint,
                        "test_fingerprint": o.test_fingerprint,
                    });
                    out.push_str(&row.to_string());
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Writes `result.json`, `repetitions.jsonl` and `summary.txt` into a
    /// fresh directory, atomically.
    pub fn write_report(&self, dir: &Path) -> Result<(), ExperimentError> {
        let full = serde_json::to_string_pretty(self).expect("serializable") + "\n";
        let rows = self.repetition_rows();
        let summary = self.render_summary();
        util::write_dir_atomic(dir, |d| -> Result<(), ExperimentError> {
            fs::write(d.join("result.json"), &full)?;
            fs::write(d.join("repetitions.jsonl"), &rows)?;
            fs::write(d.join("summary.txt"), &summary)?;
            Ok(())
        })
    }

    pub fn read_report(dir: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(dir.join("result.json"))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::InvalidSpec(format!("result.json: {e}")))
    }
}
