//! The `triage` command line.
//!
//! ```text
//! triage [--seed N] [--threads N] [--log-level L] [--config-file F] <command>
//!   corpus validate <corpus>
//!   corpus synth [--config F] --out <corpus>
//!   ocr warm <corpus> --backend <spec> --cache <file>
//!   train --kind <k> --corpus <corpus> --out <bundle>
//!   predict --model <bundle> --corpus <corpus> --out <jsonl>
//!   evaluate --spec <file> --corpus <corpus> --out <dir>
//!   compare --report <dir> --a <kind> --b <kind> --partition <tag>
//!   monitor --series <file> [--penalty x]
//!   serve --model <bundle> [--bind addr]
//! ```
//!
//! Settings come from flags, then the `--config-file` TOML, then defaults.
//! Exit status is 0 on success, 1 on a domain error and 2 on a usage error.

use std::collections::BTreeMap;
use std::error::Error;
use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{CorpusFormat, Dataset, SynthConfig};
use crate::eval::{run_experiment, ExperimentResult, ExperimentSpec, Partition};
use crate::models::{load_bundle, save_bundle, AssignmentModel, ModelConfig, ModelKind};
use crate::monitor::{self, AccuracySeries, RetrainConfig};
use crate::ocr::{self, BatchOptions, FailurePolicy, OcrCache};
use crate::service::{self, ServiceConfig};
use crate::textprep;
use crate::util;

type Result<T> = std::result::Result<T, Box<dyn Error + Send + Sync>>;

#[derive(Debug, Parser)]
#[command(name = "triage", version, about = "Multi-source issue assignment")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Base seed for generation, splits and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for every pool (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_parser = ["error", "warn", "info", "debug", "trace"])]
    pub log_level: Option<String>,
    /// TOML settings file.
    #[arg(long, global = true, env = "TRIAGE_CONFIG")]
    pub config_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus validation and synthesis.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// OCR cache management.
    Ocr {
        #[command(subcommand)]
        command: OcrCommand,
    },
    /// Train a model and write a bundle.
    Train(TrainArgs),
    /// Assign every report of a corpus with a trained bundle.
    Predict(PredictArgs),
    /// Run a repeated holdout experiment.
    Evaluate(EvaluateArgs),
    /// Rank-sum test between two kinds of an experiment report.
    Compare(CompareArgs),
    /// Change-point analysis of a daily accuracy series.
    Monitor(MonitorArgs),
    /// Serve a bundle over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    Validate {
        corpus: PathBuf,
    },
    Synth {
        /// Generator settings (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n_reports: Option<usize>,
        #[arg(long)]
        n_teams: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct OcrArgs {
    /// `inline`, `stub:<ms>`, `fixture:<file>` or `cmd:<template>`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub policy: Option<FailurePolicy>,
}

#[derive(Debug, Subcommand)]
pub enum OcrCommand {
    Warm {
        corpus: PathBuf,
        #[command(flatten)]
        ocr: OcrArgs,
    },
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long)]
    pub ngram_max: Option<usize>,
    /// One stopword per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// SVM cost parameter.
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub kind: ModelKind,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub prep: PrepArgs,
    #[command(flatten)]
    pub ocr: OcrArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Scores and explanation terms kept per report.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[command(flatten)]
    pub ocr: OcrArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Experiment spec (TOML or JSON); defaults apply when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[command(flatten)]
    pub ocr: OcrArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory written by `evaluate`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub a: ModelKind,
    #[arg(long)]
    pub b: ModelKind,
    #[arg(long, default_value = "with-screenshots")]
    pub partition: Partition,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long)]
    pub drop_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "TRIAGE_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, env = "TRIAGE_BIND")]
    pub bind: Option<SocketAddr>,
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub top_k: Option<usize>,
}

/// Contents of `--config-file`. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub log_level: Option<String>,
    pub model: ModelConfig,
    pub stopwords_file: Option<PathBuf>,
    pub ocr: OcrFileConfig,
    pub synth: Option<SynthConfig>,
    pub top_k: Option<usize>,
    pub serve: ServeFileConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcrFileConfig {
    pub backend: Option<String>,
    pub cache: Option<PathBuf>,
    pub policy: Option<FailurePolicy>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeFileConfig {
    pub model: Option<PathBuf>,
    pub bind: Option<SocketAddr>,
}

const DEFAULT_TOP_K: usize = 5;

/// TOML unless the file ends in `.json`.
fn read_structured<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    Ok(parsed.map_err(|e| format!("{}: {e}", path.display()))?)
}

struct Context {
    seed: Option<u64>,
    threads: usize,
    file: FileConfig,
}

impl Context {
    fn model_config(&self, prep: Option<&PrepArgs>) -> Result<ModelConfig> {
        let mut cfg = self.file.model.clone();
        if let Some(path) = prep.and_then(|p| p.stopwords.as_ref()).or(self.file.stopwords_file.as_ref()) {
            cfg.prep.stopwords = textprep::load_stopwords(path)?;
        }
        if let Some(p) = prep {
            if let Some(n) = p.ngram_max {
                cfg.prep.ngram_max = n;
            }
            if let Some(c) = p.c {
                cfg.train.c = c;
            }
        }
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        cfg.prep.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    fn ocr_texts(&self, dataset: &Dataset, args: &OcrArgs) -> Result<BTreeMap<String, String>> {
        let spec = args.backend.clone().or(self.file.ocr.backend.clone()).unwrap_or_else(|| "inline".into());
        let backend = ocr::backend_from_spec(&spec)?;
        let cache = match args.cache.as_ref().or(self.file.ocr.cache.as_ref()) {
            Some(p) => OcrCache::open(p)?,
            None => OcrCache::in_memory(),
        };
        let policy = args.policy.or(self.file.ocr.policy).unwrap_or_default();
        let out = ocr::extract_all(dataset, backend.as_ref(), &cache, BatchOptions { threads: self.threads, policy })?;
        if !out.substituted.is_empty() {
            log::warn!("{} attachment(s) replaced by empty text", out.substituted.len());
        }
        log::info!("OCR backend {} ({} cached results)", backend.id(), cache.len());
        Ok(out.texts)
    }

    fn log_resolved(&self, command: &str, extra: serde_json::Value) {
        let model = &self.file.model;
        log::info!(
            "{}",
            json!({
                "command": command,
                "version": env!("CARGO_PKG_VERSION"),
                "seed": self.seed,
                "threads": self.threads,
                "prep_hash": model.prep.hash(),
                "train_config_hash": model.train.hash(),
                "settings": extra,
            })
        );
    }
}

fn load_corpus(path: &Path) -> Result<Dataset> {
    Ok(Dataset::load(path, CorpusFormat::JsonLines)?)
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn init_logging(level: &str) {
    let _ = env_logger::Builder::new()
        .parse_filters(level)
        .parse_env("TRIAGE_LOG")
        .format_timestamp_millis()
        .try_init();
}

pub fn run(cli: Cli) -> Result<()> {
    let file: FileConfig = match &cli.global.config_file {
        Some(p) => read_structured(p)?,
        None => FileConfig::default(),
    };
    let level = cli.global.log_level.clone().or(file.log_level.clone()).unwrap_or_else(|| "warn".into());
    init_logging(&level);
    let threads = cli.global.threads.or(file.threads).unwrap_or(0);
    let ctx = Context { seed: cli.global.seed.or(file.seed), threads, file };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| execute(&ctx, cli.command))
}

fn execute(ctx: &Context, command: Command) -> Result<()> {
    match command {
        Command::Corpus { command: CorpusCommand::Validate { corpus } } => {
            ctx.log_resolved("corpus validate", json!({ "corpus": corpus }));
            let d = load_corpus(&corpus)?;
            let with = d.reports().iter().filter(|r| r.has_screenshot()).count();
            let any = d.reports().iter().filter(|r| !r.attachments.is_empty()).count();
            let range = d.time_range();
            println!(
                "{}",
                json!({
                    "reports": d.len(),
                    "classes": d.class_list().len(),
                    "with_attachments": any,
                    "with_screenshots": with,
                    "first": range.map(|r| r.0),
                    "last": range.map(|r| r.1),
                    "fingerprint": d.fingerprint(),
                })
            );
            Ok(())
        }
        Command::Corpus { command: CorpusCommand::Synth { config, n_reports, n_teams, out } } => {
            let mut cfg = match &config {
                Some(p) => read_structured::<SynthConfig>(p)?,
                None => ctx.file.synth.clone().unwrap_or_default(),
            };
            if let Some(s) = ctx.seed {
                cfg.seed = s;
            }
            if let Some(n) = n_reports {
                cfg.n_reports = n;
            }
            if let Some(n) = n_teams {
                cfg.n_teams = n;
            }
            ctx.log_resolved("corpus synth", serde_json::to_value(&cfg)?);
            let d = crate::corpus::generate(&cfg)?;
            d.write(&out)?;
            println!("{}", json!({ "reports": d.len(), "out": out, "fingerprint": d.fingerprint() }));
            Ok(())
        }
        Command::Ocr { command: OcrCommand::Warm { corpus, ocr } } => {
            if ocr.cache.is_none() && ctx.file.ocr.cache.is_none() {
                return Err("ocr warm needs --cache".into());
            }
            ctx.log_resolved("ocr warm", json!({ "corpus": corpus, "backend": ocr.backend }));
            let d = load_corpus(&corpus)?;
            let texts = ctx.ocr_texts(&d, &ocr)?;
            let shots: usize = d.reports().iter().map(|r| r.screenshots().count()).sum();
            println!("{}", json!({ "reports": texts.len(), "screenshots": shots }));
            Ok(())
        }
        Command::Train(args) => {
            let cfg = ctx.model_config(Some(&args.prep))?;
            ctx.log_resolved("train", json!({ "kind": args.kind, "model": cfg, "corpus": args.corpus }));
            let d = load_corpus(&args.corpus)?.filter_resolved();
            let texts = if args.kind.uses_attachments() { ctx.ocr_texts(&d, &args.ocr)? } else { BTreeMap::new() };
            let model = AssignmentModel::train(&d, args.kind, &cfg, &texts)?;
            let manifest = save_bundle(&model, &args.out, &d.fingerprint())?;
            println!(
                "{}",
                json!({
                    "kind": args.kind,
                    "reports": d.len(),
                    "classes": model.classes().len(),
                    "out": args.out,
                    "fingerprint": manifest.fingerprint,
                })
            );
            Ok(())
        }
        Command::Predict(args) => {
            let top_k = args.top_k.or(ctx.file.top_k).unwrap_or(DEFAULT_TOP_K);
            ctx.log_resolved("predict", json!({ "model": args.model, "corpus": args.corpus, "top_k": top_k }));
            let bundle = load_bundle(&args.model)?;
            let d = load_corpus(&args.corpus)?;
            let texts = if bundle.manifest.kind.uses_attachments() {
                ctx.ocr_texts(&d, &args.ocr)?
            } else {
                BTreeMap::new()
            };
            let mut out = String::new();
            for r in d.reports() {
                let text = texts.get(&r.id).map(String::as_str).unwrap_or("");
                let p = bundle.model.predict(r, text, top_k)?;
                out.push_str(&serde_json::to_string(&p)?);
                out.push('\n');
            }
            util::write_atomic(&args.out, out.as_bytes())?;
            println!("{}", json!({ "predictions": d.len(), "out": args.out }));
            Ok(())
        }
        Command::Evaluate(args) => {
            let mut spec = match &args.spec {
                Some(p) => read_structured::<ExperimentSpec>(p)?,
                None => ExperimentSpec { model: ctx.model_config(None)?, ..ExperimentSpec::default() },
            };
            if let Some(s) = ctx.seed {
                spec.seed = s;
            }
            if let Some(n) = args.repetitions {
                spec.repetitions = n;
            }
            spec.validate()?;
            ctx.log_resolved("evaluate", serde_json::to_value(&spec)?);
            let d = load_corpus(&args.corpus)?.filter_resolved();
            let texts = if spec.kinds.iter().any(|k| k.uses_attachments()) {
                ctx.ocr_texts(&d, &args.ocr)?
            } else {
                BTreeMap::new()
            };
            let result = run_experiment(&d, &spec, &texts)?;
            result.write_report(&args.out)?;
            print!("{}", result.render_summary());
            Ok(())
        }
        Command::Compare(args) => {
            ctx.log_resolved("compare", json!({ "report": args.report, "a": args.a, "b": args.b, "partition": args.partition }));
            let result = ExperimentResult::read_report(&args.report)?;
            let t = result.compare(args.a, args.b, args.partition)?;
            let mean = |k| {
                result
                    .summary_for(k, args.partition, "accuracy")
                    .and_then(|r| r.stats)
                    .map(|s| s.mean)
            };
            println!(
                "{}",
                json!({
                    "a": args.a,
                    "b": args.b,
                    "partition": args.partition,
                    "mean_a": mean(args.a),
                    "mean_b": mean(args.b),
                    "statistic": t.statistic,
                    "p_value": t.p_value,
                    "method": t.method,
                    "significant_at_0.05": t.significant(0.05),
                })
            );
            Ok(())
        }
        Command::Monitor(args) => {
            let cfg = RetrainConfig {
                penalty: args.penalty,
                drop_threshold: args.drop_threshold.unwrap_or(RetrainConfig::default().drop_threshold),
            };
            ctx.log_resolved("monitor", json!({ "series": args.series, "config": cfg }));
            let series = AccuracySeries::load(&args.series)?;
            let decision = monitor::should_retrain(&series, &cfg)?;
            let dates: Vec<_> = decision.change_points.iter().map(|&i| series.points()[i].date).collect();
            println!(
                "{}",
                json!({
                    "points": series.len(),
                    "change_points": decision.change_points,
                    "change_dates": dates,
                    "penalty": decision.penalty,
                    "previous_mean": decision.previous_mean,
                    "last_mean": decision.last_mean,
                    "retrain": decision.retrain,
                })
            );
            Ok(())
        }
        Command::Serve(args) => {
            let model = args
                .model
                .or(ctx.file.serve.model.clone())
                .ok_or("serve needs --model (or TRIAGE_MODEL)")?;
            let mut cfg = ServiceConfig::new(model);
            if let Some(b) = args.bind.or(ctx.file.serve.bind) {
                cfg.bind = b;
            }
            if let Some(b) = args.backend.or(ctx.file.ocr.backend.clone()) {
                cfg.backend = b;
            }
            cfg.top_k = args.top_k.or(ctx.file.top_k).unwrap_or(DEFAULT_TOP_K);
            if ctx.threads > 0 {
                cfg.ocr_workers = ctx.threads;
            }
            ctx.log_resolved(
                "serve",
                json!({ "model": cfg.bundle_dir, "bind": cfg.bind, "backend": cfg.backend, "top_k": cfg.top_k }),
            );
            service::serve_blocking(cfg, ctx.threads)?;
            Ok(())
        }
    }
}
