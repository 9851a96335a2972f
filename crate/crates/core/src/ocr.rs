//! Text extraction from screenshot attachments through pluggable backends,
//! with a persistent content-hash cache and per-attachment timing.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Attachment, Content, Dataset};

#[derive(Debug, Error)]
pub enum OcrError {
    #[error("attachment `{0}` is not a screenshot")]
    NotScreenshot(String),
    #[error("unreadable payload for `{id}`: {message}")]
    UnreadablePayload { id: String, message: String },
    #[error("backend `{backend}` failed on `{id}`: {message}")]
    BackendFailure { backend: String, id: String, message: String },
    #[error("{} attachment(s) failed, first: {}", .0.len(), .0[0].1)]
    Batch(Vec<(String, OcrError)>),
    #[error("bad backend spec `{0}` (expected inline, stub:<ms>, fixture:<path> or cmd:<template>)")]
    BadSpec(String),
    #[error("OCR cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrResult {
    pub text: String,
    pub duration_s: f64,
    pub backend_id: String,
    pub source_hash: String,
}

/// Attachment payload after loading.
pub enum Payload<'a> {
    Text(&'a str),
    Image { path: &'a Path, bytes: Vec<u8> },
}

pub trait OcrBackend: Send + Sync {
    fn id(&self) -> String;
    fn recognize(&self, attachment: &Attachment, payload: &Payload<'_>) -> Result<String, OcrError>;
}

impl<B: OcrBackend + ?Sized> OcrBackend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn recognize(&self, attachment: &Attachment, payload: &Payload<'_>) -> Result<String, OcrError> {
        (**self).recognize(attachment, payload)
    }
}

/// Returns pre-extracted text as is; cannot read images.
#[derive(Debug, Clone, Default)]
pub struct InlineTextBackend;

impl OcrBackend for InlineTextBackend {
    fn id(&self) -> String {
        "inline".into()
    }

    fn recognize(&self, attachment: &Attachment, payload: &Payload<'_>) -> Result<String, OcrError> {
        match payload {
            Payload::Text(t) => Ok(t.to_string()),
            Payload::Image { .. } => Err(OcrError::UnreadablePayload {
                id: attachment.id.clone(),
                message: "inline backend needs pre-extracted text".into(),
            }),
        }
    }
}

/// Wraps another backend and adds a fixed delay per call.
#[derive(Debug, Clone)]
pub struct DelayBackend<B> {
    pub inner: B,
    pub delay: Duration,
}

impl<B: OcrBackend> OcrBackend for DelayBackend<B> {
    fn id(&self) -> String {
        format!("{}+delay{}ms", self.inner.id(), self.delay.as_millis())
    }

    fn recognize(&self, attachment: &Attachment, payload: &Payload<'_>) -> Result<String, OcrError> {
        std::thread::sleep(self.delay);
        self.inner.recognize(attachment, payload)
    }
}

/// Looks results up by content hash in a sidecar file of
/// `{"hash": ..., "text": ...}` lines.
#[derive(Debug, Clone, Default)]
pub struct FixtureBackend {
    map: HashMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct FixtureLine {
    hash: String,
    text: String,
}

impl FixtureBackend {
    pub fn new(map: HashMap<String, String>) -> Self {
        Self { map }
    }

    pub fn load(path: &Path) -> Result<Self, OcrError> {
        let err = |message: String| OcrError::Cache { path: path.display().to_string(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: FixtureLine =
                serde_json::from_str(line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            map.insert(rec.hash, rec.text);
        }
        Ok(Self { map })
    }
}

impl OcrBackend for FixtureBackend {
    fn id(&self) -> String {
        "fixture".into()
    }

    fn recognize(&self, attachment: &Attachment, _payload: &Payload<'_>) -> Result<String, OcrError> {
        self.map.get(&attachment.content_hash).cloned().ok_or_else(|| OcrError::BackendFailure {
            backend: self.id(),
            id: attachment.id.clone(),
            message: format!("no fixture for hash {}", attachment.content_hash),
        })
    }
}

/// Runs an external program per image. The template is split on whitespace
/// and `{input}` is replaced by the image path; standard output is the text.
/// Inline-text payloads are written to a temporary file first.
#[derive(Debug, Clone)]
pub struct CommandBackend {
    template: Vec<String>,
}

impl CommandBackend {
    pub fn new(template: &str) -> Result<Self, OcrError> {
        let template: Vec<String> = template.split_whitespace().map(str::to_string).collect();
        if template.is_empty() || !template.iter().any(|t| t.contains("{input}")) {
            return Err(OcrError::BadSpec(template.join(" ")));
        }
        Ok(Self { template })
    }

    fn run(&self, attachment: &Attachment, path: &Path) -> Result<String, OcrError> {
        let input = path.display().to_string();
        let argv: Vec<String> = self.template.iter().map(|t| t.replace("{input}", &input)).collect();
        let fail = |message: String| OcrError::BackendFailure {
            backend: self.id(),
            id: attachment.id.clone(),
            message,
        };
        let out = Command::new(&argv[0])
            .args(&argv[1..])
            .output()
            .map_err(|e| fail(format!("spawn `{}`: {e}", argv[0])))?;
        if !out.status.success() {
            return Err(fail(format!(
                "{}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim_end().to_string())
    }
}

impl OcrBackend for CommandBackend {
    fn id(&self) -> String {
        format!("cmd:{}", self.template.join(" "))
    }

    fn recognize(&self, attachment: &Attachment, payload: &Payload<'_>) -> Result<String, OcrError> {
        match payload {
            Payload::Image { path, .. } => self.run(attachment, path),
            Payload::Text(t) => {
                let mut tmp = tempfile::NamedTempFile::new().map_err(|e| {
                    OcrError::UnreadablePayload { id: attachment.id.clone(), message: e.to_string() }
                })?;
                tmp.write_all(t.as_bytes()).map_err(|e| OcrError::UnreadablePayload {
                    id: attachment.id.clone(),
                    message: e.to_string(),
                })?;
                self.run(attachment, tmp.path())
            }
        }
    }
}

/// Parses a backend spec: `inline`, `stub:<ms>`, `fixture:<path>` or
/// `cmd:<template>`.
pub fn backend_from_spec(spec: &str) -> Result<Box<dyn OcrBackend>, OcrError> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match head {
        "inline" if rest.is_empty() => Ok(Box::new(InlineTextBackend)),
        "stub" => {
            let ms: u64 = rest.parse().map_err(|_| OcrError::BadSpec(spec.into()))?;
            Ok(Box::new(DelayBackend { inner: InlineTextBackend, delay: Duration::from_millis(ms) }))
        }
        "fixture" if !rest.is_empty() => Ok(Box::new(FixtureBackend::load(Path::new(rest))?)),
        "cmd" => Ok(Box::new(CommandBackend::new(rest)?)),
        _ => Err(OcrError::BadSpec(spec.into())),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    hash: String,
    backend_id: String,
    text: String,
    duration_s: f64,
}

/// Content-hash keyed results, optionally persisted as an append-only log.
#[derive(Debug, Default)]
pub struct OcrCache {
    inner: Mutex<CacheState>,
}

#[derive(Debug, Default)]
struct CacheState {
    entries: HashMap<String, OcrResult>,
    log: Option<(PathBuf, File)>,
}

impl OcrCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a cache log; later lines win.
    pub fn open(path: &Path) -> Result<Self, OcrError> {
        let err = |message: String| OcrError::Cache { path: path.display().to_string(), message };
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| err(e.to_string()))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheLine =
                    serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
                entries.insert(
                    rec.hash.clone(),
                    OcrResult {
                        text: rec.text,
                        duration_s: rec.duration_s,
                        backend_id: rec.backend_id,
                        source_hash: rec.hash,
                    },
                );
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| err(e.to_string()))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| err(e.to_string()))?;
        Ok(Self {
            inner: Mutex::new(CacheState { entries, log: Some((path.to_path_buf(), file)) }),
        })
    }

    pub fn get(&self, hash: &str) -> Option<OcrResult> {
        self.inner.lock().expect("cache lock").entries.get(hash).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, result: OcrResult) -> Result<(), OcrError> {
        let mut state = self.inner.lock().expect("cache lock");
        if let Some((path, file)) = state.log.as_mut() {
            let line = serde_json::to_string(&CacheLine {
                hash: result.source_hash.clone(),
                backend_id: result.backend_id.clone(),
                text: result.text.clone(),
                duration_s: result.duration_s,
            })
            .expect("serializable");
            writeln!(file, "{line}").map_err(|e| OcrError::Cache {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        }
        state.entries.insert(result.source_hash.clone(), result);
        Ok(())
    }
}

fn load_payload(attachment: &Attachment) -> Result<Payload<'_>, OcrError> {
    match &attachment.content {
        Content::Text(t) => Ok(Payload::Text(t)),
        Content::Path(p) => {
            let bytes = fs::read(p).map_err(|e| OcrError::UnreadablePayload {
                id: attachment.id.clone(),
                message: format!("{}: {e}", p.display()),
            })?;
            Ok(Payload::Image { path: p, bytes })
        }
    }
}

/// Runs the backend without consulting any cache. The duration covers
/// payload loading plus recognition.
pub fn extract_uncached(
    attachment: &Attachment,
    backend: &dyn OcrBackend,
) -> Result<OcrResult, OcrError> {
    if !attachment.is_screenshot() {
        return Err(OcrError::NotScreenshot(attachment.id.clone()));
    }
    let start = Instant::now();
    let payload = load_payload(attachment)?;
    let text = backend.recognize(attachment, &payload)?;
    Ok(OcrResult {
        text,
        duration_s: start.elapsed().as_secs_f64(),
        backend_id: backend.id(),
        source_hash: attachment.content_hash.clone(),
    })
}

/// Cache hits skip the backend entirely; misses are extracted and stored.
pub fn extract(
    attachment: &Attachment,
    backend: &dyn OcrBackend,
    cache: &OcrCache,
) -> Result<OcrResult, OcrError> {
    if !attachment.is_screenshot() {
        return Err(OcrError::NotScreenshot(attachment.id.clone()));
    }
    if let Some(hit) = cache.get(&attachment.content_hash) {
        return Ok(hit);
    }
    let result = extract_uncached(attachment, backend)?;
    cache.insert(result.clone())?;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailurePolicy {
    #[default]
    FailFast,
    SubstituteEmpty,
}

impl std::str::FromStr for FailurePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fail-fast" => Ok(Self::FailFast),
            "substitute-empty" => Ok(Self::SubstituteEmpty),
            _ => Err(format!("unknown failure policy `{s}` (fail-fast | substitute-empty)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BatchOptions {
    /// Worker bound; 0 means the global pool.
    pub threads: usize,
    pub policy: FailurePolicy,
}

#[derive(Debug, Default)]
pub struct BatchOutput {
    /// Report id to screenshot text (texts joined by newlines, in attachment
    /// order; empty when the report has no screenshot).
    pub texts: BTreeMap<String, String>,
    /// Failures replaced by empty text under `SubstituteEmpty`.
    pub substituted: Vec<(String, String)>,
}

/// Screenshot text for every report in `dataset`. Attachments may be
/// processed concurrently; the output does not depend on the schedule.
pub fn extract_all(
    dataset: &Dataset,
    backend: &dyn OcrBackend,
    cache: &OcrCache,
    options: BatchOptions,
) -> Result<BatchOutput, OcrError> {
    let jobs: Vec<(usize, &Attachment)> = dataset
        .reports()
        .iter()
        .enumerate()
        .flat_map(|(ri, r)| r.screenshots().map(move |a| (ri, a)))
        .collect();
    let run = || -> Vec<Result<OcrResult, OcrError>> {
        jobs.par_iter().map(|(_, a)| extract(a, backend, cache)).collect()
    };
    let results = if options.threads == 1 {
        jobs.iter().map(|(_, a)| extract(a, backend, cache)).collect()
    } else if options.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.threads)
            .build()
            .map_err(|e| OcrError::BadSpec(format!("thread pool: {e}")))?
            .install(run)
    } else {
        run()
    };

    let mut per_report: Vec<Vec<String>> = vec![Vec::new(); dataset.len()];
    let mut failures = Vec::new();
    let mut substituted = Vec::new();
    for ((ri, a), res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => per_report[*ri].push(r.text),
            Err(e) => match options.policy {
                FailurePolicy::FailFast => failures.push((a.id.clone(), e)),
                FailurePolicy::SubstituteEmpty => {
                    log::warn!("OCR failed for {}: {e}; using empty text", a.id);
                    substituted.push((a.id.clone(), e.to_string()));
                    per_report[*ri].push(String::new());
                }
            },
        }
    }
    if !failures.is_empty() {
        return Err(OcrError::Batch(failures));
    }
    let texts = dataset
        .reports()
        .iter()
        .zip(per_report)
        .map(|(r, parts)| (r.id.clone(), parts.join("\n")))
        .collect();
    Ok(BatchOutput { texts, substituted })
}

/// Screenshot text of a corpus whose attachments are inline text, read
/// without any cache. Path-backed screenshots map to empty text.
pub fn inline_texts(dataset: &Dataset) -> BTreeMap<String, String> {
    let opts = BatchOptions { threads: 0, policy: FailurePolicy::SubstituteEmpty };
    extract_all(dataset, &InlineTextBackend, &OcrCache::in_memory(), opts)
        .expect("substitute-empty never fails")
        .texts
}
