//! The SVM-family assignment models and the hybrid router.
//!
//! | kind                | channels                                       |
//! |---------------------|------------------------------------------------|
//! | `TextOnly`          | summary + description                          |
//! | `AttachmentOnly`    | screenshot text                                |
//! | `MergedMulti`       | summary + description + screenshot text, one channel |
//! | `TwoChannelMulti`   | report text and screenshot text, separate tf-idf |
//! | `Hybrid`            | `TwoChannelMulti` if the report has a screenshot, else `TextOnly` |

mod bundle;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{self, ClassifierError, LinearModel, TrainConfig};
use crate::corpus::{Dataset, IssueReport};
use crate::textprep::{self, PrepConfig, PrepError};
use crate::vectorizer::{SparseVector, TfIdfModel, TwoChannelModel, VectorizerConfig, VectorizerError};

pub use bundle::{load_bundle, save_bundle, BundleError, BundleManifest, ComponentEntry, LoadedBundle};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Prep(#[from] PrepError),
    #[error(transparent)]
    Vectorizer(#[from] VectorizerError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("report `{0}` has no assignee")]
    MissingAssignee(String),
    #[error("no OCR text for report `{0}`, which has screenshots")]
    MissingOcr(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    TextOnly,
    AttachmentOnly,
    MergedMulti,
    TwoChannelMulti,
    Hybrid,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::TextOnly,
        ModelKind::AttachmentOnly,
        ModelKind::MergedMulti,
        ModelKind::TwoChannelMulti,
        ModelKind::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TextOnly => "text-only",
            ModelKind::AttachmentOnly => "attachment-only",
            ModelKind::MergedMulti => "merged-multi",
            ModelKind::TwoChannelMulti => "two-channel-multi",
            ModelKind::Hybrid => "hybrid",
        }
    }

    /// Whether assigning with this kind needs screenshot text.
    pub fn uses_attachments(self) -> bool {
        !matches!(self, ModelKind::TextOnly)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "text-only" => ModelKind::TextOnly,
            "attachment-only" => ModelKind::AttachmentOnly,
            "merged-multi" => ModelKind::MergedMulti,
            "two-channel-multi" => ModelKind::TwoChannelMulti,
            "hybrid" => ModelKind::Hybrid,
            _ => return Err(format!("unknown model kind `{s}`")),
        };
        Ok(k)
    }
}

/// Which text stream a feature came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Report,
    Attachment,
    Merged,
}

/// Everything needed to build a model from a training set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub prep: PrepConfig,
    pub vectorizer: VectorizerConfig,
    pub train: TrainConfig,
}

fn report_terms(report: &IssueReport, prep: &PrepConfig) -> Vec<String> {
    let mut t = textprep::terms(&report.summary, prep);
    t.extend(textprep::terms(&report.description, prep));
    t
}

/// Channel term lists for `report` under `kind`. Hybrid assembles for the
/// sub-model it would route to.
pub fn assemble(
    report: &IssueReport,
    kind: ModelKind,
    attachment_text: &str,
    prep: &PrepConfig,
) -> Vec<Vec<String>> {
    match kind {
        ModelKind::TextOnly => vec![report_terms(report, prep)],
        ModelKind::AttachmentOnly => vec![textprep::terms(attachment_text, prep)],
        ModelKind::MergedMulti => {
            let mut t = report_terms(report, prep);
            t.extend(textprep::terms(attachment_text, prep));
            vec![t]
        }
        ModelKind::TwoChannelMulti => {
            vec![report_terms(report, prep), textprep::terms(attachment_text, prep)]
        }
        ModelKind::Hybrid => assemble(report, route(report), attachment_text, prep),
    }
}

/// Hybrid routing: presence of a screenshot attachment, regardless of
/// whether any text was recognized in it.
pub fn route(report: &IssueReport) -> ModelKind {
    if report.has_screenshot() {
        ModelKind::TwoChannelMulti
    } else {
        ModelKind::TextOnly
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureModel {
    Single(TfIdfModel),
    TwoChannel(TwoChannelModel),
}

impl FeatureModel {
    pub fn dim(&self) -> usize {
        match self {
            FeatureModel::Single(m) => m.dim(),
            FeatureModel::TwoChannel(m) => m.dim(),
        }
    }

    fn transform(&self, channels: &[Vec<String>]) -> SparseVector {
        match self {
            FeatureModel::Single(m) => m.transform(&channels[0]),
            FeatureModel::TwoChannel(m) => m.transform(&channels[0], &channels[1]),
        }
    }

    /// Term and channel behind feature column `index`.
    fn describe(&self, index: usize, single_channel: Channel) -> (String, Channel) {
        match self {
            FeatureModel::Single(m) => (m.term(index).unwrap_or("?").to_string(), single_channel),
            FeatureModel::TwoChannel(m) => {
                let split = m.report_channel.dim();
                if index < split {
                    (m.report_channel.term(index).unwrap_or("?").to_string(), Channel::Report)
                } else {
                    (
                        m.attachment_channel.term(index - split).unwrap_or("?").to_string(),
                        Channel::Attachment,
                    )
                }
            }
        }
    }
}

/// A trained non-hybrid model.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleModel {
    kind: ModelKind,
    prep: PrepConfig,
    features: FeatureModel,
    linear: LinearModel,
}

impl SingleModel {
    pub fn train(
        train_set: &Dataset,
        kind: ModelKind,
        config: &ModelConfig,
        ocr_texts: &BTreeMap<String, String>,
    ) -> Result<Self, ModelError> {
        assert_ne!(kind, ModelKind::Hybrid, "hybrid is composed of two single models");
        config.prep.validate()?;
        if train_set.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let mut docs: Vec<Vec<Vec<String>>> = Vec::with_capacity(train_set.len());
        let mut labels = Vec::with_capacity(train_set.len());
        for r in train_set.reports() {
            if r.assignee.is_empty() {
                return Err(ModelError::MissingAssignee(r.id.clone()));
            }
            let text = attachment_text_for(r, kind, ocr_texts)?;
            docs.push(assemble(r, kind, text, &config.prep));
            labels.push(r.assignee.as_str());
        }
        let features = match kind {
            ModelKind::TwoChannelMulti => {
                let (rep, att): (Vec<_>, Vec<_>) = docs
                    .iter()
                    .map(|ch| (ch[0].clone(), ch[1].clone()))
                    .unzip();
                FeatureModel::TwoChannel(TwoChannelModel::fit(&rep, &att, config.vectorizer)?)
            }
            _ => {
                let single: Vec<Vec<String>> = docs.iter().map(|ch| ch[0].clone()).collect();
                FeatureModel::Single(TfIdfModel::fit_with(&single, config.vectorizer)?)
            }
        };
        let vectors: Vec<SparseVector> = docs.iter().map(|ch| features.transform(ch)).collect();
        let linear = LinearModel::train(&vectors, &labels, &config.train)?;
        Ok(Self { kind, prep: config.prep.clone(), features, linear })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn prep(&self) -> &PrepConfig {
        &self.prep
    }

    pub fn features(&self) -> &FeatureModel {
        &self.features
    }

    pub fn linear(&self) -> &LinearModel {
        &self.linear
    }

    fn single_channel(&self) -> Channel {
        match self.kind {
            ModelKind::AttachmentOnly => Channel::Attachment,
            ModelKind::MergedMulti => Channel::Merged,
            _ => Channel::Report,
        }
    }

    pub fn vectorize(&self, report: &IssueReport, attachment_text: &str) -> SparseVector {
        self.features.transform(&assemble(report, self.kind, attachment_text, &self.prep))
    }

    fn assign_vector(&self, x: &SparseVector, top_k: usize) -> Result<AssignmentResult, ModelError> {
        let scores = self.linear.decision_scores(x)?;
        let best = classifier::argmax(&scores);
        Ok(AssignmentResult {
            team: self.linear.classes()[best].clone(),
            scores: self.linear.classes().iter().cloned().zip(scores).collect(),
            explanation: self.contributions(x, best, Some(top_k)),
            routed_to: self.kind,
        })
    }

    /// Per-feature contributions `w[idx] * x[idx]` toward class `class`,
    /// largest first (ties by column).
    fn contributions(&self, x: &SparseVector, class: usize, top_k: Option<usize>) -> Vec<Contribution> {
        let w = self.linear.class_weights(class);
        let mut parts: Vec<(usize, f64)> = x.entries().iter().map(|&(i, v)| (i, w[i] * v)).collect();
        parts.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        if let Some(k) = top_k {
            parts.truncate(k);
        }
        let channel = self.single_channel();
        parts
            .into_iter()
            .map(|(i, contribution)| {
                let (term, channel) = self.features.describe(i, channel);
                Contribution { term, channel, contribution }
            })
            .collect()
    }
}

fn attachment_text_for<'a>(
    report: &IssueReport,
    kind: ModelKind,
    ocr_texts: &'a BTreeMap<String, String>,
) -> Result<&'a str, ModelError> {
    if !kind.uses_attachments() {
        return Ok("");
    }
    match ocr_texts.get(&report.id) {
        Some(t) => Ok(t),
        None if report.has_screenshot() => Err(ModelError::MissingOcr(report.id.clone())),
        None => Ok(""),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub term: String,
    pub channel: Channel,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub team: String,
    /// Decision value per class, in class order.
    pub scores: Vec<(String, f64)>,
    pub explanation: Vec<Contribution>,
    pub routed_to: ModelKind,
}

impl AssignmentResult {
    pub fn score_of(&self, team: &str) -> Option<f64> {
        self.scores.iter().find(|(t, _)| t == team).map(|&(_, s)| s)
    }

    /// Scores sorted by value, highest first (ties keep class order).
    pub fn ranked_scores(&self) -> Vec<(String, f64)> {
        let mut s = self.scores.clone();
        s.sort_by(|a, b| b.1.total_cmp(&a.1));
        s
    }
}

pub const DEFAULT_EXPLANATION_TERMS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub team: String,
    pub score: f64,
}

/// Wire form of an assignment: the `k` best scores and explanation terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub team: String,
    pub scores: Vec<ScoreEntry>,
    pub explanation: Vec<Contribution>,
    pub routed_to: ModelKind,
}

impl AssignmentResult {
    pub fn to_prediction(&self, id: Option<String>, k: usize) -> Prediction {
        Prediction {
            id,
            team: self.team.clone(),
            scores: self
                .ranked_scores()
                .into_iter()
                .take(k)
                .map(|(team, score)| ScoreEntry { team, score })
                .collect(),
            explanation: self.explanation.iter().take(k).cloned().collect(),
            routed_to: self.routed_to,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum AssignmentModel {
    Single(SingleModel),
    Hybrid { two_channel: SingleModel, text_only: SingleModel },
}

impl AssignmentModel {
    /// Trains a model of `kind`. Hybrid trains both sub-models on the full
    /// training set; routing only happens at prediction time.
    pub fn train(
        train_set: &Dataset,
        kind: ModelKind,
        config: &ModelConfig,
        ocr_texts: &BTreeMap<String, String>,
    ) -> Result<Self, ModelError> {
        if kind == ModelKind::Hybrid {
            let (two, text) = rayon::join(
                || SingleModel::train(train_set, ModelKind::TwoChannelMulti, config, ocr_texts),
                || SingleModel::train(train_set, ModelKind::TextOnly, config, ocr_texts),
            );
            Ok(Self::hybrid(two?, text?))
        } else {
            Ok(Self::Single(SingleModel::train(train_set, kind, config, ocr_texts)?))
        }
    }

    pub fn hybrid(two_channel: SingleModel, text_only: SingleModel) -> Self {
        assert_eq!(two_channel.kind, ModelKind::TwoChannelMulti);
        assert_eq!(text_only.kind, ModelKind::TextOnly);
        Self::Hybrid { two_channel, text_only }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Single(m) => m.kind,
            Self::Hybrid { .. } => ModelKind::Hybrid,
        }
    }

    /// Sorted union of the classes known to the sub-models.
    pub fn classes(&self) -> Vec<String> {
        match self {
            Self::Single(m) => m.linear.classes().to_vec(),
            Self::Hybrid { two_channel, text_only } => {
                let mut c: Vec<String> = two_channel
                    .linear
                    .classes()
                    .iter()
                    .chain(text_only.linear.classes())
                    .cloned()
                    .collect();
                c.sort();
                c.dedup();
                c
            }
        }
    }

    pub fn sub_models(&self) -> Vec<&SingleModel> {
        match self {
            Self::Single(m) => vec![m],
            Self::Hybrid { two_channel, text_only } => vec![two_channel, text_only],
        }
    }

    /// The sub-model that handles `report`.
    pub fn routed(&self, report: &IssueReport) -> &SingleModel {
        match self {
            Self::Single(m) => m,
            Self::Hybrid { two_channel, text_only } => {
                if route(report) == ModelKind::TwoChannelMulti {
                    two_channel
                } else {
                    text_only
                }
            }
        }
    }

    pub fn assign(&self, report: &IssueReport, attachment_text: &str) -> Result<AssignmentResult, ModelError> {
        self.assign_top(report, attachment_text, DEFAULT_EXPLANATION_TERMS)
    }

    /// Assigns and keeps the `k` best scores and explanation terms.
    pub fn predict(&self, report: &IssueReport, attachment_text: &str, k: usize) -> Result<Prediction, ModelError> {
        Ok(self.assign_top(report, attachment_text, k)?.to_prediction(Some(report.id.clone()), k))
    }

    pub fn assign_top(
        &self,
        report: &IssueReport,
        attachment_text: &str,
        explain_k: usize,
    ) -> Result<AssignmentResult, ModelError> {
        let m = self.routed(report);
        m.assign_vector(&m.vectorize(report, attachment_text), explain_k)
    }

    /// Top-`k` linear contributions behind `result`.
    pub fn explain(
        &self,
        report: &IssueReport,
        attachment_text: &str,
        result: &AssignmentResult,
        k: usize,
    ) -> Vec<Contribution> {
        self.contributions(report, attachment_text, result, Some(k))
    }

    /// Every non-zero contribution; these plus the class bias add up to the
    /// predicted class score.
    pub fn all_contributions(
        &self,
        report: &IssueReport,
        attachment_text: &str,
        result: &AssignmentResult,
    ) -> Vec<Contribution> {
        self.contributions(report, attachment_text, result, None)
    }

    fn contributions(
        &self,
        report: &IssueReport,
        attachment_text: &str,
        result: &AssignmentResult,
        k: Option<usize>,
    ) -> Vec<Contribution> {
        let m = self.routed(report);
        let Some(class) = m.linear.classes().iter().position(|c| *c == result.team) else {
            return Vec::new();
        };
        m.contributions(&m.vectorize(report, attachment_text), class, k)
    }

    /// Bias of the predicted class in the sub-model that produced `result`.
    pub fn bias_for(&self, report: &IssueReport, result: &AssignmentResult) -> Option<f64> {
        let m = self.routed(report);
        let class = m.linear.classes().iter().position(|c| *c == result.team)?;
        Some(m.linear.bias(class))
    }
}
