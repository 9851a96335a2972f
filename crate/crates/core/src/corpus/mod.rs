//! Issue-report datasets: the line-delimited record format, validation,
//! filtering, splitting, and the synthetic corpus generator.

mod noise;
mod synth;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{self, Fingerprint};

pub use noise::{NoiseSpec, CONFUSION_TABLE};
pub use synth::{generate, team_vocabularies, SynthConfig};

/// Extensions that mark an attachment as a screenshot.
pub const SCREENSHOT_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "gif"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid field `{field}`: {message}")]
    SchemaViolation { line: usize, field: String, message: String },
    #[error("duplicate report id `{0}`")]
    DuplicateId(String),
    #[error("split leaves the {0} side empty")]
    EmptySide(Side),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Train,
    Test,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Train => "train",
            Side::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Resolved,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttachmentKind {
    Screenshot,
    Other,
}

impl AttachmentKind {
    /// Kind implied by a locator's file extension.
    pub fn from_locator(locator: &str) -> Self {
        let ext = Path::new(locator)
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext {
            Some(e) if SCREENSHOT_EXTENSIONS.contains(&e.as_str()) => Self::Screenshot,
            _ => Self::Other,
        }
    }
}

/// Where the attachment payload lives.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Content {
    /// Text that has already been extracted from the image.
    Text(String),
    /// An image file on disk.
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Attachment {
    pub id: String,
    pub kind: AttachmentKind,
    pub content: Content,
    pub content_hash: String,
}

impl Attachment {
    /// Inline-text attachment; kind inferred from `id`'s extension.
    pub fn inline(id: impl Into<String>, text: impl Into<String>) -> Self {
        let id = id.into();
        let text = text.into();
        Self {
            kind: AttachmentKind::from_locator(&id),
            content_hash: util::sha256_hex(text.as_bytes()),
            content: Content::Text(text),
            id,
        }
    }

    pub fn with_kind(mut self, kind: AttachmentKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn is_screenshot(&self) -> bool {
        self.kind == AttachmentKind::Screenshot
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IssueReport {
    pub id: String,
    pub summary: String,
    pub description: String,
    pub attachments: Vec<Attachment>,
    pub assignee: String,
    pub created_at: DateTime<Utc>,
    pub status: Status,
}

impl IssueReport {
    pub fn screenshots(&self) -> impl Iterator<Item = &Attachment> {
        self.attachments.iter().filter(|a| a.is_screenshot())
    }

    pub fn has_screenshot(&self) -> bool {
        self.screenshots().next().is_some()
    }
}

/// On-disk attachment record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttachmentRecord {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<AttachmentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hash: Option<String>,
}

/// On-disk report record, one per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportRecord {
    id: String,
    summary: String,
    description: String,
    #[serde(default)]
    assignee: String,
    created_at: DateTime<Utc>,
    status: Status,
    #[serde(default)]
    attachments: Vec<AttachmentRecord>,
}

impl From<&IssueReport> for ReportRecord {
    fn from(r: &IssueReport) -> Self {
        Self {
            id: r.id.clone(),
            summary: r.summary.clone(),
            description: r.description.clone(),
            assignee: r.assignee.clone(),
            created_at: r.created_at,
            status: r.status,
            attachments: r
                .attachments
                .iter()
                .map(|a| {
                    let (text, path) = match &a.content {
                        Content::Text(t) => (Some(t.clone()), None),
                        Content::Path(p) => (None, Some(p.display().to_string())),
                    };
                    AttachmentRecord {
                        id: a.id.clone(),
                        kind: Some(a.kind),
                        text,
                        path,
                        hash: Some(a.content_hash.clone()),
                    }
                })
                .collect(),
        }
    }
}

fn violation(line: usize, field: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::SchemaViolation { line, field: field.to_string(), message: message.into() }
}

impl ReportRecord {
    fn into_report(self, line: usize, base: &Path) -> Result<IssueReport, CorpusError> {
        if self.id.trim().is_empty() {
            return Err(violation(line, "id", "must be non-empty"));
        }
        let mut attachments = Vec::with_capacity(self.attachments.len());
        let mut seen = HashSet::new();
        for a in self.attachments {
            if a.id.is_empty() {
                return Err(violation(line, "attachments.id", "must be non-empty"));
            }
            if !seen.insert(a.id.clone()) {
                return Err(violation(line, "attachments.id", format!("duplicate `{}`", a.id)));
            }
            let (content, locator) = match (a.text, a.path) {
                (Some(t), None) => (Content::Text(t), a.id.clone()),
                (None, Some(p)) => {
                    let path = PathBuf::from(&p);
                    let path = if path.is_relative() { base.join(path) } else { path };
                    (Content::Path(path), p)
                }
                _ => {
                    return Err(violation(
                        line,
                        "attachments",
                        format!("attachment `{}` needs exactly one of `text` or `path`", a.id),
                    ))
                }
            };
            let content_hash = match (a.hash, &content) {
                (Some(h), _) => h,
                (None, Content::Text(t)) => util::sha256_hex(t.as_bytes()),
                (None, Content::Path(p)) => {
                    let bytes = fs::read(p).map_err(|e| {
                        violation(line, "attachments.path", format!("{}: {e}", p.display()))
                    })?;
                    util::sha256_hex(&bytes)
                }
            };
            attachments.push(Attachment {
                id: a.id,
                kind: a.kind.unwrap_or_else(|| AttachmentKind::from_locator(&locator)),
                content,
                content_hash,
            });
        }
        Ok(IssueReport {
            id: self.id,
            summary: self.summary,
            description: self.description,
            attachments,
            assignee: self.assignee,
            created_at: self.created_at,
            status: self.status,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// One JSON object per line.
    #[default]
    JsonLines,
}

/// Ordered reports plus the sorted set of assignees present.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    reports: Vec<IssueReport>,
    class_list: Vec<String>,
}

impl Dataset {
    pub fn new(reports: Vec<IssueReport>) -> Result<Self, CorpusError> {
        let mut ids = HashSet::with_capacity(reports.len());
        for r in &reports {
            if !ids.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self::from_unique(reports))
    }

    /// Caller guarantees unique ids (subsets of a valid dataset).
    fn from_unique(reports: Vec<IssueReport>) -> Self {
        let class_list = reports
            .iter()
            .filter(|r| !r.assignee.is_empty())
            .map(|r| r.assignee.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Self { reports, class_list }
    }

    pub fn reports(&self) -> &[IssueReport] {
        &self.reports
    }

    pub fn class_list(&self) -> &[String] {
        &self.class_list
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&IssueReport> {
        self.reports.iter().find(|r| r.id == id)
    }

    pub fn subset(&self, keep: impl Fn(&IssueReport) -> bool) -> Dataset {
        Self::from_unique(self.reports.iter().filter(|r| keep(r)).cloned().collect())
    }

    pub fn load(path: &Path, format: CorpusFormat) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, format)
    }

    /// Parses corpus text; relative attachment paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, format: CorpusFormat) -> Result<Self, CorpusError> {
        let CorpusFormat::JsonLines = format;
        let mut reports = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let rec: ReportRecord = serde_json::from_str(raw).map_err(|e| {
                let msg = e.to_string();
                let field = msg
                    .split('`')
                    .nth(1)
                    .filter(|_| msg.contains("field"))
                    .unwrap_or("record")
                    .to_string();
                violation(line, &field, msg)
            })?;
            reports.push(rec.into_report(line, base)?);
        }
        Self::new(reports)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            out.push_str(&serde_json::to_string(&ReportRecord::from(r)).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        util::write_atomic(path, self.to_jsonl().as_bytes()).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Digest of the canonical serialized form.
    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::new();
        for r in &self.reports {
            fp.update(serde_json::to_string(&ReportRecord::from(r)).expect("serializable"));
        }
        fp.finish()
    }

    /// Digest of the report ids only, in order.
    pub fn id_fingerprint(&self) -> String {
        let mut fp = Fingerprint::new();
        for r in &self.reports {
            fp.update(&r.id);
        }
        fp.finish()
    }

    pub fn filter_resolved(&self) -> Dataset {
        self.subset(|r| r.status == Status::Resolved)
    }

    /// Stable sort by creation time.
    pub fn sorted_by_time(&self) -> Dataset {
        let mut reports = self.reports.clone();
        reports.sort_by_key(|r| r.created_at);
        Self::from_unique(reports)
    }

    pub fn time_range(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        let min = self.reports.iter().map(|r| r.created_at).min()?;
        let max = self.reports.iter().map(|r| r.created_at).max()?;
        Some((min, max))
    }

    /// Train: strictly before `cutoff`; test: at or after it.
    pub fn temporal_split(&self, cutoff: DateTime<Utc>) -> Result<(Dataset, Dataset), CorpusError> {
        let train = self.subset(|r| r.created_at < cutoff);
        let test = self.subset(|r| r.created_at >= cutoff);
        check_sides(train, test)
    }

    /// Seeded random partition with `round_half_up(n * train_fraction)`
    /// training reports. Both sides keep the original report order.
    pub fn random_split(
        &self,
        train_fraction: f64,
        seed: u64,
    ) -> Result<(Dataset, Dataset), CorpusError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(CorpusError::InvalidSplit(format!(
                "train_fraction must be in (0, 1), got {train_fraction}"
            )));
        }
        let n = self.len();
        let n_train = ((n as f64) * train_fraction + 0.5).floor() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut util::rng(seed));
        let mut in_train = vec![false; n];
        for &i in &order[..n_train.min(n)] {
            in_train[i] = true;
        }
        let pick = |want: bool| {
            Self::from_unique(
                self.reports
                    .iter()
                    .zip(&in_train)
                    .filter(|(_, &t)| t == want)
                    .map(|(r, _)| r.clone())
                    .collect(),
            )
        };
        check_sides(pick(true), pick(false))
    }
}

fn check_sides(train: Dataset, test: Dataset) -> Result<(Dataset, Dataset), CorpusError> {
    if train.is_empty() {
        return Err(CorpusError::EmptySide(Side::Train));
    }
    if test.is_empty() {
        return Err(CorpusError::EmptySide(Side::Test));
    }
    Ok((train, test))
}
