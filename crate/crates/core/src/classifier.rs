//! One-vs-rest linear SVM trained by dual coordinate descent on the
//! L2-regularized hinge loss.
//!
//! Each class gets a binary problem with labels +1 (this class) and -1
//! (everything else). The bias is learned as an extra feature column with
//! constant value `bias_scale`, so it is regularized like any other weight.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{self, Fingerprint};
use crate::vectorizer::SparseVector;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("training data holds a single class ({0}); need at least two")]
    SingleClass(String),
    #[error("no training data")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0} vectors but {1} labels")]
    LabelCount(usize, usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("unsupported model artifact version {0}")]
    Version(u32),
    #[error("corrupt model artifact: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub fit_bias: bool,
    pub bias_scale: f64,
    /// Record objective values after every pass (costs one extra sweep per
    /// pass; meant for small diagnostics runs).
    #[serde(default)]
    pub trace: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_iter: 1000,
            seed: 0,
            fit_bias: true,
            bias_scale: 1.0,
            trace: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("c must be positive and finite");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if self.fit_bias && !(self.bias_scale > 0.0 && self.bias_scale.is_finite()) {
            return bad("bias_scale must be positive and finite");
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let mut fp = Fingerprint::new();
        fp.update(self.c.to_le_bytes())
            .update(self.tol.to_le_bytes())
            .update(self.max_iter.to_le_bytes())
            .update(self.seed.to_le_bytes())
            .update([self.fit_bias as u8])
            .update(self.bias_scale.to_le_bytes());
        fp.finish()
    }
}

/// Objective values after one full pass of coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    /// `0.5 |w|^2 - sum(alpha)`, the minimized dual form.
    pub dual_objective: f64,
    /// `0.5 |w|^2 + c * sum(hinge)`.
    pub primal_objective: f64,
    pub max_violation: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl PassRecord {
    /// Primal minus the (maximized) dual value; never negative.
    pub fn gap(&self) -> f64 {
        self.primal_objective + self.dual_objective
    }
}

/// Solver outcome for one binary sub-problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryReport {
    pub passes: usize,
    pub converged: bool,
    pub max_violation: f64,
    pub dual_objective: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<PassRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub train_config: TrainConfig,
    pub config_hash: String,
    pub data_fingerprint: String,
    pub n_samples: usize,
    pub per_class: Vec<BinaryReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    classes: Vec<String>,
    /// One row per class, `feature_dim` weights plus the bias column when
    /// fitted with a bias.
    weights: Vec<Vec<f64>>,
    feature_dim: usize,
    fit_bias: bool,
    bias_scale: f64,
    metadata: ModelMetadata,
}

/// Final state of one binary solve, kept for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct BinarySolution {
    pub weights: Vec<f64>,
    pub alpha: Vec<f64>,
    pub report: BinaryReport,
}

fn dot_aug(w: &[f64], x: &SparseVector, bias: f64) -> f64 {
    let mut s = x.dot_dense(w);
    if bias > 0.0 {
        s += w[x.dim()] * bias;
    }
    s
}

fn axpy_aug(a: f64, x: &SparseVector, bias: f64, w: &mut [f64]) {
    for &(i, v) in x.entries() {
        w[i] += a * v;
    }
    if bias > 0.0 {
        let d = x.dim();
        w[d] += a * bias;
    }
}

fn projected_gradient(g: f64, alpha: f64, c: f64) -> f64 {
    if alpha <= 0.0 {
        g.min(0.0)
    } else if alpha >= c {
        g.max(0.0)
    } else {
        g
    }
}

/// Solves one binary hinge-loss problem. `y[i]` must be +1 or -1; `bias` is
/// the augmented column value (0 disables it).
pub fn solve_binary(
    xs: &[SparseVector],
    y: &[f64],
    dim: usize,
    bias: f64,
    config: &TrainConfig,
    seed: u64,
) -> BinarySolution {
    let n = xs.len();
    let c = config.c;
    let eps = config.tol;
    let width = dim + usize::from(bias > 0.0);
    let mut w = vec![0.0; width];
    let mut alpha = vec![0.0; n];
    let qd: Vec<f64> = xs.iter().map(|x| x.norm_squared() + bias * bias).collect();
    let mut index: Vec<usize> = (0..n).collect();
    let mut active = n;
    let mut rng = util::rng(seed);

    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;
    let mut passes = 0;
    let mut converged = false;
    let mut trace = Vec::new();

    let violation = |w: &[f64], alpha: &[f64]| -> f64 {
        (0..n)
            .map(|i| projected_gradient(y[i] * dot_aug(w, &xs[i], bias) - 1.0, alpha[i], c).abs())
            .fold(0.0, f64::max)
    };

    while passes < config.max_iter {
        let mut pg_max_new = f64::NEG_INFINITY;
        let mut pg_min_new = f64::INFINITY;
        index[..active].shuffle(&mut rng);

        let mut s = 0;
        while s < active {
            let i = index[s];
            let yi = y[i];
            let g = yi * dot_aug(&w, &xs[i], bias) - 1.0;
            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if g > pg_max_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] == c {
                if g < pg_min_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max_new = pg_max_new.max(pg);
            pg_min_new = pg_min_new.min(pg);

            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = if qd[i] > 0.0 {
                    (old - g / qd[i]).clamp(0.0, c)
                } else {
                    // Zero row: the coordinate objective is linear in alpha.
                    c
                };
                let d = (alpha[i] - old) * yi;
                if d != 0.0 {
                    axpy_aug(d, &xs[i], bias, &mut w);
                }
            }
            s += 1;
        }
        passes += 1;

        if config.trace {
            trace.push(pass_record(&w, &alpha, xs, y, bias, c, violation(&w, &alpha)));
        }

        if pg_max_new - pg_min_new <= eps {
            if active == n {
                // Shrinking-free pass met the criterion; confirm against the
                // final weights before stopping.
                if violation(&w, &alpha) <= eps {
                    converged = true;
                    break;
                }
            }
            active = n;
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max_new <= 0.0 { f64::INFINITY } else { pg_max_new };
        pg_min_old = if pg_min_new >= 0.0 { f64::NEG_INFINITY } else { pg_min_new };
    }

    let max_violation = violation(&w, &alpha);
    let dual_objective = 0.5 * w.iter().map(|v| v * v).sum::<f64>() - alpha.iter().sum::<f64>();
    BinarySolution {
        weights: w,
        alpha,
        report: BinaryReport { passes, converged, max_violation, dual_objective, trace },
    }
}

fn pass_record(
    w: &[f64],
    alpha: &[f64],
    xs: &[SparseVector],
    y: &[f64],
    bias: f64,
    c: f64,
    max_violation: f64,
) -> PassRecord {
    let half_norm = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = xs
        .iter()
        .zip(y)
        .map(|(x, &yi)| (1.0 - yi * dot_aug(w, x, bias)).max(0.0))
        .sum();
    PassRecord {
        dual_objective: half_norm - alpha.iter().sum::<f64>(),
        primal_objective: half_norm + c * hinge,
        max_violation,
        alpha_min: alpha.iter().copied().fold(f64::INFINITY, f64::min),
        alpha_max: alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Fingerprint of a training set: feature vectors bit-for-bit plus labels.
pub fn data_fingerprint<S: AsRef<str>>(vectors: &[SparseVector], labels: &[S]) -> String {
    let mut fp = Fingerprint::new();
    for (x, l) in vectors.iter().zip(labels) {
        fp.update(x.dim().to_le_bytes());
        for &(i, v) in x.entries() {
            fp.update(i.to_le_bytes()).update(v.to_bits().to_le_bytes());
        }
        fp.update(l.as_ref());
    }
    fp.finish()
}

impl LinearModel {
    pub fn train<S: AsRef<str>>(
        vectors: &[SparseVector],
        labels: &[S],
        config: &TrainConfig,
    ) -> Result<Self, ClassifierError> {
        config.validate()?;
        if vectors.len() != labels.len() {
            return Err(ClassifierError::LabelCount(vectors.len(), labels.len()));
        }
        let first = vectors.first().ok_or(ClassifierError::Empty)?;
        let dim = first.dim();
        if let Some(bad) = vectors.iter().find(|v| v.dim() != dim) {
            return Err(ClassifierError::DimensionMismatch { expected: dim, got: bad.dim() });
        }
        let mut classes: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
        classes.sort();
        classes.dedup();
        if classes.len() < 2 {
            return Err(ClassifierError::SingleClass(classes.remove(0)));
        }
        let class_of: Vec<usize> = labels
            .iter()
            .map(|l| classes.binary_search_by(|c| c.as_str().cmp(l.as_ref())).unwrap())
            .collect();
        let bias = if config.fit_bias { config.bias_scale } else { 0.0 };

        let solutions: Vec<BinarySolution> = (0..classes.len())
            .into_par_iter()
            .map(|k| {
                let y: Vec<f64> =
                    class_of.iter().map(|&ci| if ci == k { 1.0 } else { -1.0 }).collect();
                solve_binary(vectors, &y, dim, bias, config, util::mix_seed(config.seed, k as u64))
            })
            .collect();

        let (weights, per_class) =
            solutions.into_iter().map(|s| (s.weights, s.report)).unzip();
        Ok(Self {
            classes,
            weights,
            feature_dim: dim,
            fit_bias: config.fit_bias,
            bias_scale: config.bias_scale,
            metadata: ModelMetadata {
                train_config: config.clone(),
                config_hash: config.hash(),
                data_fingerprint: data_fingerprint(vectors, labels),
                n_samples: vectors.len(),
                per_class,
            },
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    /// Feature weights of class `k`, without the bias column.
    pub fn class_weights(&self, k: usize) -> &[f64] {
        &self.weights[k][..self.feature_dim]
    }

    pub fn bias(&self, k: usize) -> f64 {
        if self.fit_bias {
            self.weights[k][self.feature_dim] * self.bias_scale
        } else {
            0.0
        }
    }

    fn check_dim(&self, x: &SparseVector) -> Result<(), ClassifierError> {
        if x.dim() != self.feature_dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.feature_dim,
                got: x.dim(),
            });
        }
        Ok(())
    }

    pub fn decision_scores(&self, x: &SparseVector) -> Result<Vec<f64>, ClassifierError> {
        self.check_dim(x)?;
        Ok((0..self.classes.len())
            .map(|k| x.dot_dense(self.class_weights(k)) + self.bias(k))
            .collect())
    }

    pub fn predict(&self, x: &SparseVector) -> Result<&str, ClassifierError> {
        let scores = self.decision_scores(x)?;
        Ok(&self.classes[argmax(&scores)])
    }

    pub fn to_artifact(&self) -> LinearArtifact {
        LinearArtifact {
            version: ARTIFACT_VERSION,
            classes: self.classes.clone(),
            feature_dim: self.feature_dim,
            fit_bias: self.fit_bias,
            bias_scale: self.bias_scale,
            weights: self.weights.clone(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_artifact(a: LinearArtifact) -> Result<Self, ClassifierError> {
        if a.version != ARTIFACT_VERSION {
            return Err(ClassifierError::Version(a.version));
        }
        let width = a.feature_dim + usize::from(a.fit_bias);
        if a.weights.len() != a.classes.len() || a.weights.iter().any(|w| w.len() != width) {
            return Err(ClassifierError::Corrupt("weight matrix shape".into()));
        }
        if a.classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ClassifierError::Corrupt("classes not strictly sorted".into()));
        }
        if a.weights.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ClassifierError::Corrupt("non-finite weight".into()));
        }
        Ok(Self {
            classes: a.classes,
            weights: a.weights,
            feature_dim: a.feature_dim,
            fit_bias: a.fit_bias,
            bias_scale: a.bias_scale,
            metadata: a.metadata,
        })
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearArtifact {
    pub version: u32,
    pub classes: Vec<String>,
    pub feature_dim: usize,
    pub fit_bias: bool,
    pub bias_scale: f64,
    pub weights: Vec<Vec<f64>>,
    pub metadata: ModelMetadata,
}
