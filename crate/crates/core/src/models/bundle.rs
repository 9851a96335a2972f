//! On-disk model bundles.
//!
//! A bundle is a directory holding `manifest.json` plus one sub-directory
//! per single model (`text-only/`, `two-channel-multi/`, ...), each with
//! `model.json`, `features.json` and `linear.json`. The manifest lists the
//! sha-256 of every component; loading recomputes and compares them.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AssignmentModel, FeatureModel, ModelKind, SingleModel};
use crate::classifier::{LinearArtifact, LinearModel};
use crate::textprep::PrepConfig;
use crate::util::{self, Fingerprint};
use crate::vectorizer::{TfIdfArtifact, TfIdfModel, TwoChannelModel};

const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle I/O on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("component {path} hash mismatch (manifest {expected}, found {found})")]
    HashMismatch { path: String, expected: String, found: String },
    #[error("bundle fingerprint mismatch")]
    FingerprintMismatch,
    #[error("unsupported bundle format version {0}")]
    Version(u32),
    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
}

impl From<io::Error> for BundleError {
    fn from(source: io::Error) -> Self {
        BundleError::Io { path: String::new(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub kind: ModelKind,
    pub created_at: DateTime<Utc>,
    pub corpus_fingerprint: String,
    pub prep_hash: String,
    pub crate_version: String,
    pub components: Vec<ComponentEntry>,
    /// Digest over everything above except `created_at`.
    pub fingerprint: String,
}

impl BundleManifest {
    fn compute_fingerprint(&self) -> String {
        let mut fp = Fingerprint::new();
        fp.update(self.format_version.to_le_bytes())
            .update(self.kind.as_str())
            .update(&self.corpus_fingerprint)
            .update(&self.prep_hash)
            .update(&self.crate_version);
        for c in &self.components {
            fp.update(&c.path).update(&c.sha256);
        }
        fp.finish()
    }
}

#[derive(Debug, Clone)]
pub struct LoadedBundle {
    pub model: AssignmentModel,
    pub manifest: BundleManifest,
    pub path: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct SubModelHeader {
    kind: ModelKind,
    prep: PrepConfig,
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("artifact serializes");
    out.push(b'\n');
    out
}

fn sub_model_files(m: &SingleModel) -> Vec<(String, Vec<u8>)> {
    let dir = m.kind.as_str();
    let features: Vec<TfIdfArtifact> = match &m.features {
        FeatureModel::Single(t) => vec![t.to_artifact()],
        FeatureModel::TwoChannel(t) => {
            vec![t.report_channel.to_artifact(), t.attachment_channel.to_artifact()]
        }
    };
    vec![
        (
            format!("{dir}/model.json"),
            to_json(&SubModelHeader { kind: m.kind, prep: m.prep.clone() }),
        ),
        (format!("{dir}/features.json"), to_json(&features)),
        (format!("{dir}/linear.json"), to_json(&m.linear.to_artifact())),
    ]
}

/// Writes `model` to `dir` atomically, replacing whatever was there.
pub fn save_bundle(
    model: &AssignmentModel,
    dir: &Path,
    corpus_fingerprint: &str,
) -> Result<BundleManifest, BundleError> {
    save_bundle_at(model, dir, corpus_fingerprint, Utc::now())
}

pub fn save_bundle_at(
    model: &AssignmentModel,
    dir: &Path,
    corpus_fingerprint: &str,
    created_at: DateTime<Utc>,
) -> Result<BundleManifest, BundleError> {
    let files: Vec<(String, Vec<u8>)> = model.sub_models().into_iter().flat_map(sub_model_files).collect();
    let mut manifest = BundleManifest {
        format_version: FORMAT_VERSION,
        kind: model.kind(),
        created_at,
        corpus_fingerprint: corpus_fingerprint.to_string(),
        prep_hash: model.sub_models()[0].prep.hash(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        components: files
            .iter()
            .map(|(p, bytes)| ComponentEntry { path: p.clone(), sha256: util::sha256_hex(bytes) })
            .collect(),
        fingerprint: String::new(),
    };
    manifest.fingerprint = manifest.compute_fingerprint();
    let manifest_bytes = to_json(&manifest);
    util::write_dir_atomic(dir, |staging| -> Result<(), BundleError> {
        for (rel, bytes) in &files {
            let p = staging.join(rel);
            fs::create_dir_all(p.parent().expect("component has a parent"))?;
            fs::write(&p, bytes)?;
        }
        fs::write(staging.join(MANIFEST), &manifest_bytes)?;
        Ok(())
    })
    .map_err(|e| with_path(e, dir))?;
    Ok(manifest)
}

fn with_path(e: BundleError, dir: &Path) -> BundleError {
    match e {
        BundleError::Io { path, source } if path.is_empty() => {
            BundleError::Io { path: dir.display().to_string(), source }
        }
        other => other,
    }
}

fn read(dir: &Path, rel: &str) -> Result<Vec<u8>, BundleError> {
    let p = dir.join(rel);
    fs::read(&p).map_err(|source| BundleError::Io { path: p.display().to_string(), source })
}

fn parse<T: for<'de> Deserialize<'de>>(bytes: &[u8], rel: &str) -> Result<T, BundleError> {
    serde_json::from_slice(bytes).map_err(|e| BundleError::Malformed {
        path: rel.to_string(),
        message: e.to_string(),
    })
}

/// Loads and self-checks a bundle: component hashes, manifest fingerprint,
/// sub-model layout and feature dimensions.
pub fn load_bundle(dir: &Path) -> Result<LoadedBundle, BundleError> {
    let manifest: BundleManifest = parse(&read(dir, MANIFEST)?, MANIFEST)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(BundleError::Version(manifest.format_version));
    }
    if manifest.compute_fingerprint() != manifest.fingerprint {
        return Err(BundleError::FingerprintMismatch);
    }
    for c in &manifest.components {
        let found = util::sha256_hex(&read(dir, &c.path)?);
        if found != c.sha256 {
            return Err(BundleError::HashMismatch {
                path: c.path.clone(),
                expected: c.sha256.clone(),
                found,
            });
        }
    }

    let expected: &[ModelKind] = match manifest.kind {
        ModelKind::Hybrid => &[ModelKind::TwoChannelMulti, ModelKind::TextOnly],
        k => &[k],
    };
    if manifest.components.len() != 3 * expected.len() {
        return Err(BundleError::Inconsistent(format!(
            "{} bundle must hold exactly {} sub-model(s)",
            manifest.kind,
            expected.len()
        )));
    }
    let mut subs = Vec::new();
    for &kind in expected {
        let sub = load_sub_model(dir, kind)?;
        if sub.prep.hash() != manifest.prep_hash {
            return Err(BundleError::Inconsistent(format!("{kind} prep config differs from manifest")));
        }
        subs.push(sub);
    }
    let model = if manifest.kind == ModelKind::Hybrid {
        let text_only = subs.pop().expect("two sub-models");
        let two_channel = subs.pop().expect("two sub-models");
        AssignmentModel::hybrid(two_channel, text_only)
    } else {
        AssignmentModel::Single(subs.pop().expect("one sub-model"))
    };
    Ok(LoadedBundle { model, manifest, path: dir.to_path_buf() })
}

fn load_sub_model(dir: &Path, kind: ModelKind) -> Result<SingleModel, BundleError> {
    let base = kind.as_str();
    let rel = |f: &str| format!("{base}/{f}");
    let header: SubModelHeader = parse(&read(dir, &rel("model.json"))?, &rel("model.json"))?;
    if header.kind != kind {
        return Err(BundleError::Inconsistent(format!("{} holds a {} model", base, header.kind)));
    }
    let features: Vec<TfIdfArtifact> = parse(&read(dir, &rel("features.json"))?, &rel("features.json"))?;
    let linear: LinearArtifact = parse(&read(dir, &rel("linear.json"))?, &rel("linear.json"))?;
    let bad = |message: String| BundleError::Malformed { path: rel("features.json"), message };
    let mut models = features
        .into_iter()
        .map(TfIdfModel::from_artifact)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| bad(e.to_string()))?;
    let features = match (kind, models.len()) {
        (ModelKind::TwoChannelMulti, 2) => {
            let attachment_channel = models.pop().expect("two channels");
            let report_channel = models.pop().expect("two channels");
            FeatureModel::TwoChannel(TwoChannelModel { report_channel, attachment_channel })
        }
        (ModelKind::TwoChannelMulti, n) => return Err(bad(format!("expected 2 channels, found {n}"))),
        (_, 1) => FeatureModel::Single(models.pop().expect("one channel")),
        (_, n) => return Err(bad(format!("expected 1 channel, found {n}"))),
    };
    let linear = LinearModel::from_artifact(linear).map_err(|e| BundleError::Malformed {
        path: rel("linear.json"),
        message: e.to_string(),
    })?;
    if linear.feature_dim() != features.dim() {
        return Err(BundleError::Inconsistent(format!(
            "{base}: classifier expects {} features, vectorizer yields {}",
            linear.feature_dim(),
            features.dim()
        )));
    }
    header.prep.validate().map_err(|e| BundleError::Malformed {
        path: rel("model.json"),
        message: e.to_string(),
    })?;
    Ok(SingleModel { kind, prep: header.prep, features, linear })
}
