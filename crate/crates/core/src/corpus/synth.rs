//! Synthetic issue corpora shaped after an industrial triage setting: most
//! reports carry attachments, most of those are screenshots, reports with
//! attachments are terser, and in some of them the only team-specific
//! evidence sits in the screenshot text.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Attachment, AttachmentKind, CorpusError, Dataset, IssueReport, NoiseSpec, Status};
use crate::util::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_reports: usize,
    pub n_teams: usize,
    pub p_attachment: f64,
    pub p_screenshot_given_attachment: f64,
    pub mean_words_with_attachment: usize,
    pub mean_words_without: usize,
    /// Among reports with screenshots: chance that the summary and
    /// description carry no team-specific terms at all.
    pub p_signal_in_attachment_only: f64,
    pub ocr_noise: NoiseSpec,
    pub seed: u64,
    /// Fraction of report words drawn from a team vocabulary.
    pub signal_density: f64,
    /// Chance that a team-specific word in the report text comes from the
    /// neighbouring team.
    pub crosstalk: f64,
    /// Same for team words printed on a screenshot; failures often surface
    /// on the screen of an adjacent module.
    pub screenshot_crosstalk: f64,
    /// Navigation labels (module names of random teams) visible on every
    /// screenshot. A module name is discriminative in prose but appears on
    /// every screen.
    pub menu_labels: usize,
    pub start: DateTime<Utc>,
    pub span_days: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_reports: 10_000,
            n_teams: 20,
            p_attachment: 0.68,
            p_screenshot_given_attachment: 0.843,
            mean_words_with_attachment: 29,
            mean_words_without: 41,
            p_signal_in_attachment_only: 0.5,
            ocr_noise: NoiseSpec::default(),
            seed: 1,
            signal_density: 0.12,
            crosstalk: 0.05,
            screenshot_crosstalk: 0.75,
            menu_labels: 2,
            start: Utc.with_ymd_and_hms(2019, 3, 1, 0, 0, 0).unwrap(),
            span_days: 184,
        }
    }
}

const TEAM_VOCAB: usize = 40;
const GENERIC_VOCAB: usize = 400;
const SCREEN_VOCAB: usize = 8;
const BOILERPLATE_VOCAB: usize = 30;

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let probs = [
            ("p_attachment", self.p_attachment),
            ("p_screenshot_given_attachment", self.p_screenshot_given_attachment),
            ("p_signal_in_attachment_only", self.p_signal_in_attachment_only),
            ("signal_density", self.signal_density),
            ("crosstalk", self.crosstalk),
            ("screenshot_crosstalk", self.screenshot_crosstalk),
            ("ocr_noise.rate", self.ocr_noise.rate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(CorpusError::InvalidConfig(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        let counts = [
            ("n_reports", self.n_reports),
            ("n_teams", self.n_teams),
            ("mean_words_with_attachment", self.mean_words_with_attachment),
            ("mean_words_without", self.mean_words_without),
            ("span_days", self.span_days as usize),
        ];
        for (name, c) in counts {
            if c == 0 {
                return Err(CorpusError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

struct Lexicon {
    teams: Vec<Vec<String>>,
    screens: Vec<Vec<String>>,
    generic: Vec<String>,
    boilerplate: Vec<String>,
    generic_weights: WeightedIndex<f64>,
}

fn pseudo_word(rng: &mut Rng) -> String {
    const ONSETS: &[&str] = &[
        "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "y", "z",
    ];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
    const CODAS: &[&str] = &["", "", "", "n", "r", "l", "m", "s", "rn"];
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
    }
    w
}

impl Lexicon {
    fn build(config: &SynthConfig) -> Self {
        let mut rng = util::rng(util::mix_seed(config.seed, 0x1E71C0));
        let mut used = BTreeSet::new();
        let mut draw = |n: usize, rng: &mut Rng| -> Vec<String> {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let w = pseudo_word(rng);
                if used.insert(w.clone()) {
                    out.push(w);
                }
            }
            out
        };
        let teams = (0..config.n_teams).map(|_| draw(TEAM_VOCAB, &mut rng)).collect();
        let screens = (0..config.n_teams).map(|_| draw(SCREEN_VOCAB, &mut rng)).collect();
        let generic = draw(GENERIC_VOCAB, &mut rng);
        let boilerplate = draw(BOILERPLATE_VOCAB, &mut rng);
        let generic_weights =
            WeightedIndex::new((0..GENERIC_VOCAB).map(|r| 1.0 / ((r + 1) as f64).powf(0.8)))
                .expect("positive weights");
        Self { teams, screens, generic, boilerplate, generic_weights }
    }

    fn generic_word(&self, rng: &mut Rng) -> &str {
        &self.generic[self.generic_weights.sample(rng)]
    }

    fn team_word(&self, team: usize, crosstalk: f64, rng: &mut Rng) -> &str {
        let owner = if rng.random_bool(crosstalk) { (team + 1) % self.teams.len() } else { team };
        let vocab = &self.teams[owner];
        &vocab[rng.random_range(0..vocab.len())]
    }
}

/// The discriminative vocabulary owned by each team (pairwise disjoint).
pub fn team_vocabularies(config: &SynthConfig) -> Vec<Vec<String>> {
    Lexicon::build(config).teams
}

pub fn team_name(k: usize) -> String {
    format!("team-{:02}", k + 1)
}

struct Draft {
    team: usize,
    created_at: DateTime<Utc>,
    summary: String,
    description: String,
    attachments: Vec<(AttachmentKind, &'static str, String)>,
}

fn report_text(
    lex: &Lexicon,
    cfg: &SynthConfig,
    team: usize,
    mean: usize,
    hidden: bool,
    rng: &mut Rng,
) -> (String, String) {
    let lo = mean.div_ceil(2).max(2);
    let hi = (mean * 3 / 2).max(lo);
    let n = rng.random_range(lo..=hi);
    let words: Vec<&str> = (0..n)
        .map(|_| {
            if !hidden && rng.random_bool(cfg.signal_density) {
                lex.team_word(team, cfg.crosstalk, rng)
            } else {
                lex.generic_word(rng)
            }
        })
        .collect();
    let split = (n / 5).clamp(1, 6);
    (words[..split].join(" "), words[split..].join(" "))
}

fn screenshot_text(lex: &Lexicon, cfg: &SynthConfig, team: usize, rng: &mut Rng) -> String {
    // Screens are shared with the neighbouring team.
    let screen = if rng.random_bool(0.6) { team } else { (team + 1) % lex.screens.len() };
    let mut words: Vec<&str> = Vec::new();
    for _ in 0..3 {
        words.push(&lex.screens[screen][rng.random_range(0..SCREEN_VOCAB)]);
    }
    for _ in 0..rng.random_range(2..=4) {
        words.push(&lex.boilerplate[rng.random_range(0..BOILERPLATE_VOCAB)]);
    }
    for _ in 0..cfg.menu_labels {
        words.push(&lex.teams[rng.random_range(0..lex.teams.len())][0]);
    }
    for _ in 0..rng.random_range(3..=5) {
        if rng.random_bool(0.7) {
            words.push(lex.team_word(team, cfg.screenshot_crosstalk, rng));
        } else {
            words.push(lex.generic_word(rng));
        }
    }
    cfg.ocr_noise.corrupt_text(&words.join(" "))
}

fn other_text(lex: &Lexicon, rng: &mut Rng) -> String {
    let n = rng.random_range(8..=20);
    (0..n).map(|_| lex.generic_word(rng)).collect::<Vec<_>>().join(" ")
}

/// Generates a dataset; a pure function of `config` (including its seed).
pub fn generate(config: &SynthConfig) -> Result<Dataset, CorpusError> {
    config.validate()?;
    let lex = Lexicon::build(config);
    let mut rng = util::rng(config.seed);
    let team_weights =
        WeightedIndex::new((0..config.n_teams).map(|k| 1.0 / (1.0 + 0.05 * k as f64)))
            .expect("positive weights");
    let span_secs = i64::from(config.span_days) * 86_400;

    let mut drafts: Vec<Draft> = (0..config.n_reports)
        .map(|_| {
            let team = team_weights.sample(&mut rng);
            let created_at = config.start + Duration::seconds(rng.random_range(0..span_secs));
            let has_attachment = rng.random_bool(config.p_attachment);
            let has_screenshot =
                has_attachment && rng.random_bool(config.p_screenshot_given_attachment);
            let hidden = has_screenshot && rng.random_bool(config.p_signal_in_attachment_only);
            let mean = if has_attachment {
                config.mean_words_with_attachment
            } else {
                config.mean_words_without
            };
            let (summary, description) = report_text(&lex, config, team, mean, hidden, &mut rng);

            let mut attachments = Vec::new();
            if has_attachment {
                let mut n = 1;
                while n < 4 && rng.random_bool(0.2) {
                    n += 1;
                }
                for i in 0..n {
                    let shot = has_screenshot && (i == 0 || rng.random_bool(0.5));
                    if shot {
                        attachments.push((
                            AttachmentKind::Screenshot,
                            "png",
                            screenshot_text(&lex, config, team, &mut rng),
                        ));
                    } else {
                        let ext = ["docx", "xlsx", "txt", "pdf"][rng.random_range(0..4)];
                        attachments.push((AttachmentKind::Other, ext, other_text(&lex, &mut rng)));
                    }
                }
            }
            Draft { team, created_at, summary, description, attachments }
        })
        .collect();

    drafts.sort_by_key(|d| d.created_at);
    let width = config.n_reports.to_string().len().max(5);
    let reports = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let id = format!("r{:0width$}", i + 1);
            let attachments = d
                .attachments
                .into_iter()
                .enumerate()
                .map(|(k, (kind, ext, text))| {
                    Attachment::inline(format!("{id}-a{}.{ext}", k + 1), text).with_kind(kind)
                })
                .collect();
            IssueReport {
                id,
                summary: d.summary,
                description: d.description,
                attachments,
                assignee: team_name(d.team),
                created_at: d.created_at,
                status: Status::Resolved,
            }
        })
        .collect();
    Dataset::new(reports)
}
