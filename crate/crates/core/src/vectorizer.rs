//! Per-channel tf-idf statistics and L2-normalized sparse document vectors.
//!
//! Weights use the smoothed idf `ln((1 + n) / (1 + df)) + 1` and raw term
//! counts as tf. Vocabulary columns follow sorted term order, so a fit is
//! fully determined by its input documents.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum VectorizerError {
    #[error("cannot fit tf-idf statistics on an empty corpus")]
    EmptyCorpus,
    #[error("report and attachment document lists differ in length ({0} vs {1})")]
    ChannelLengthMismatch(usize, usize),
    #[error("unsupported artifact version {0}")]
    Version(u32),
    #[error("corrupt tf-idf artifact: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorizerConfig {
    pub min_df: usize,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        Self { min_df: 1 }
    }
}

/// Sparse vector with strictly increasing indices and non-zero values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Builds a vector from arbitrary (index, value) pairs: sorts, sums
    /// duplicates and drops zeros.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in pairs {
            assert!(i < dim, "index {i} out of bounds for dim {dim}");
            *acc.entry(i).or_insert(0.0) += v;
        }
        Self {
            dim,
            entries: acc.into_iter().filter(|&(_, v)| v != 0.0).collect(),
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_pairs(values.len(), values.iter().copied().enumerate())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| w[i] * v).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::from_pairs(self.dim, self.entries.iter().map(|&(i, v)| (i, v * alpha)))
    }

    /// Concatenates `other` after `self`, offsetting its indices by `self.dim`.
    pub fn concat(&self, other: &SparseVector) -> Self {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|&(i, v)| (i + self.dim, v)));
        Self { dim: self.dim + other.dim, entries }
    }

    fn l2_normalized(mut self) -> Self {
        let norm = self.norm_squared().sqrt();
        if norm > 0.0 {
            for e in &mut self.entries {
                e.1 /= norm;
            }
        }
        self
    }
}

/// Fitted statistics for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    terms: Vec<String>,
    vocab: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
    n_docs: usize,
    config: VectorizerConfig,
}

pub fn smooth_idf(n_docs: usize, doc_freq: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + doc_freq as f64)).ln() + 1.0
}

impl TfIdfModel {
    pub fn fit(documents: &[Vec<String>]) -> Result<Self, VectorizerError> {
        Self::fit_with(documents, VectorizerConfig::default())
    }

    pub fn fit_with(
        documents: &[Vec<String>],
        config: VectorizerConfig,
    ) -> Result<Self, VectorizerError> {
        if documents.is_empty() {
            return Err(VectorizerError::EmptyCorpus);
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in documents {
            let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let (terms, doc_freq): (Vec<String>, Vec<usize>) = df
            .into_iter()
            .filter(|&(_, c)| c >= config.min_df.max(1))
            .map(|(t, c)| (t.to_string(), c))
            .unzip();
        Ok(Self::from_parts(terms, doc_freq, documents.len(), config))
    }

    fn from_parts(
        terms: Vec<String>,
        doc_freq: Vec<usize>,
        n_docs: usize,
        config: VectorizerConfig,
    ) -> Self {
        let vocab = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let idf = doc_freq.iter().map(|&d| smooth_idf(n_docs, d)).collect();
        Self { terms, vocab, doc_freq, idf, n_docs, config }
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn config(&self) -> VectorizerConfig {
        self.config
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.vocab.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.terms.get(index).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.idf[i])
    }

    pub fn idf_values(&self) -> &[f64] {
        &self.idf
    }

    /// count(t) * idf(t) for in-vocabulary terms, L2-normalized.
    pub fn transform<S: AsRef<str>>(&self, terms: &[S]) -> SparseVector {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for t in terms {
            if let Some(&i) = self.vocab.get(t.as_ref()) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        SparseVector {
            dim: self.dim(),
            entries: counts
                .into_iter()
                .map(|(i, c)| (i, c as f64 * self.idf[i]))
                .collect(),
        }
        .l2_normalized()
    }

    pub fn to_artifact(&self) -> TfIdfArtifact {
        TfIdfArtifact {
            version: ARTIFACT_VERSION,
            config: self.config,
            n_docs: self.n_docs,
            vocab: self.terms.clone(),
            doc_freq: self.doc_freq.clone(),
            idf: self.idf.clone(),
        }
    }

    pub fn from_artifact(a: TfIdfArtifact) -> Result<Self, VectorizerError> {
        if a.version != ARTIFACT_VERSION {
            return Err(VectorizerError::Version(a.version));
        }
        if a.vocab.len() != a.doc_freq.len() || a.vocab.len() != a.idf.len() {
            return Err(VectorizerError::Corrupt("column count mismatch".into()));
        }
        if a.vocab.windows(2).any(|w| w[0] >= w[1]) {
            return Err(VectorizerError::Corrupt("vocabulary is not strictly sorted".into()));
        }
        if a.doc_freq.iter().any(|&d| d == 0 || d > a.n_docs) {
            return Err(VectorizerError::Corrupt("document frequency out of range".into()));
        }
        let model = Self::from_parts(a.vocab, a.doc_freq, a.n_docs, a.config);
        if model.idf != a.idf {
            return Err(VectorizerError::Corrupt(
                "stored idf disagrees with recomputation".into(),
            ));
        }
        Ok(model)
    }
}

/// Serialized form of a [`TfIdfModel`]. `idf` is redundant and checked on
/// load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfArtifact {
    pub version: u32,
    pub config: VectorizerConfig,
    pub n_docs: usize,
    pub vocab: Vec<String>,
    pub doc_freq: Vec<usize>,
    pub idf: Vec<f64>,
}

/// Independently fitted report and attachment channels.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoChannelModel {
    pub report_channel: TfIdfModel,
    pub attachment_channel: TfIdfModel,
}

impl TwoChannelModel {
    pub fn fit(
        report_docs: &[Vec<String>],
        attachment_docs: &[Vec<String>],
        config: VectorizerConfig,
    ) -> Result<Self, VectorizerError> {
        if report_docs.len() != attachment_docs.len() {
            return Err(VectorizerError::ChannelLengthMismatch(
                report_docs.len(),
                attachment_docs.len(),
            ));
        }
        Ok(Self {
            report_channel: TfIdfModel::fit_with(report_docs, config)?,
            attachment_channel: TfIdfModel::fit_with(attachment_docs, config)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.report_channel.dim() + self.attachment_channel.dim()
    }

    /// Each channel is normalized on its own; the concatenation is not
    /// renormalized.
    pub fn transform<S: AsRef<str>>(&self, report_terms: &[S], attachment_terms: &[S]) -> SparseVector {
        self.report_channel
            .transform(report_terms)
            .concat(&self.attachment_channel.transform(attachment_terms))
    }
}
