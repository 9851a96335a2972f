use std::collections::BTreeMap;
use std::sync::OnceLock;

use issue_triage::corpus::{generate, Dataset, IssueReport, SynthConfig};
use issue_triage::eval::{run_experiment, score, ExperimentSpec, Partition};
use issue_triage::models::{AssignmentModel, ModelConfig, ModelKind};
use issue_triage::ocr;
use proptest::prelude::*;

fn small() -> SynthConfig {
    SynthConfig { n_reports: 1500, n_teams: 6, ..SynthConfig::default() }
}

fn accuracy(model: &AssignmentModel, test: &Dataset, texts: &BTreeMap<String, String>) -> f64 {
    let preds: Vec<String> = test
        .reports()
        .iter()
        .map(|r| model.assign(r, texts.get(&r.id).map_or("", String::as_str)).unwrap().team)
        .collect();
    let truths: Vec<&str> = test.reports().iter().map(|r| r.assignee.as_str()).collect();
    score(&preds, &truths, test.class_list(), Partition::All).unwrap().accuracy
}

#[test]
fn visible_signal_makes_text_only_accurate() {
    let d = generate(&SynthConfig { p_signal_in_attachment_only: 0.0, ..SynthConfig::default() }).unwrap();
    let (train, test) = d.random_split(0.8, 1).unwrap();
    let model = AssignmentModel::train(&train, ModelKind::TextOnly, &ModelConfig::default(), &BTreeMap::new()).unwrap();
    let acc = accuracy(&model, &test, &BTreeMap::new());
    assert!(acc >= 0.95, "text-only accuracy {acc}");
}

#[test]
fn two_channel_beats_text_only_on_average() {
    let d = generate(&SynthConfig { n_reports: 4000, ..SynthConfig::default() }).unwrap();
    let spec = ExperimentSpec {
        kinds: vec![ModelKind::TextOnly, ModelKind::TwoChannelMulti],
        repetitions: 10,
        ..ExperimentSpec::default()
    };
    let r = run_experiment(&d, &spec, &ocr::inline_texts(&d)).unwrap();
    let mean = |k| {
        let a = r.accuracies(k, Partition::All).unwrap();
        a.iter().sum::<f64>() / a.len() as f64
    };
    assert!(mean(ModelKind::TwoChannelMulti) > mean(ModelKind::TextOnly));
}

#[test]
fn text_only_ignores_attachments_during_training() {
    let d = generate(&small()).unwrap();
    let stripped = Dataset::new(
        d.reports().iter().cloned().map(|r| IssueReport { attachments: Vec::new(), ..r }).collect(),
    )
    .unwrap();
    let cfg = ModelConfig::default();
    let a = AssignmentModel::train(&d, ModelKind::TextOnly, &cfg, &ocr::inline_texts(&d)).unwrap();
    let b = AssignmentModel::train(&stripped, ModelKind::TextOnly, &cfg, &BTreeMap::new()).unwrap();
    let (a, b) = (a.sub_models()[0], b.sub_models()[0]);
    assert_eq!(a.linear().to_artifact().weights, b.linear().to_artifact().weights);
    assert_eq!(a.features().dim(), b.features().dim());
}

#[test]
fn hybrid_defers_to_its_sub_models() {
    let d = generate(&small()).unwrap();
    let texts = ocr::inline_texts(&d);
    let (train, test) = d.random_split(0.8, 2).unwrap();
    let cfg = ModelConfig::default();
    let hybrid = AssignmentModel::train(&train, ModelKind::Hybrid, &cfg, &texts).unwrap();
    assert_eq!(hybrid.sub_models().len(), 2);
    let two = AssignmentModel::Single(hybrid.sub_models()[0].clone());
    let text = AssignmentModel::Single(hybrid.sub_models()[1].clone());
    assert_eq!(two.kind(), ModelKind::TwoChannelMulti);
    assert_eq!(text.kind(), ModelKind::TextOnly);
    for r in test.reports() {
        let t = &texts[&r.id];
        let got = hybrid.assign(r, t).unwrap();
        let want = if r.has_screenshot() { two.assign(r, t).unwrap() } else { text.assign(r, t).unwrap() };
        assert_eq!(got.scores, want.scores);
        assert_eq!(got.routed_to, want.routed_to);
    }
}

#[test]
fn explanations_add_up_to_the_score() {
    let d = generate(&small()).unwrap();
    let texts = ocr::inline_texts(&d);
    for kind in ModelKind::ALL {
        let model = AssignmentModel::train(&d, kind, &ModelConfig::default(), &texts).unwrap();
        for r in d.reports().iter().take(100) {
            let t = &texts[&r.id];
            let res = model.assign(r, t).unwrap();
            let total: f64 = model.all_contributions(r, t, &res).iter().map(|c| c.contribution).sum::<f64>()
                + model.bias_for(r, &res).unwrap();
            let s = res.score_of(&res.team).unwrap();
            assert!((total - s).abs() < 1e-9, "{kind}: {total} vs {s}");
        }
    }
}

struct Fixture {
    data: Dataset,
    texts: BTreeMap<String, String>,
    text_only: AssignmentModel,
    attachment_only: AssignmentModel,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let data = generate(&small()).unwrap();
        let texts = ocr::inline_texts(&data);
        let cfg = ModelConfig::default();
        Fixture {
            text_only: AssignmentModel::train(&data, ModelKind::TextOnly, &cfg, &texts).unwrap(),
            attachment_only: AssignmentModel::train(&data, ModelKind::AttachmentOnly, &cfg, &texts).unwrap(),
            data,
            texts,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channels_are_isolated(idx in 0usize..1500, noise in "[a-z0-9 ]{0,60}") {
        let f = fixture();
        let r = &f.data.reports()[idx % f.data.len()];
        let text = &f.texts[&r.id];

        let base = f.text_only.assign(r, text).unwrap();
        let mutated = f.text_only.assign(r, &format!("{text} {noise}")).unwrap();
        prop_assert_eq!(base.scores, mutated.scores);

        let base = f.attachment_only.assign(r, text).unwrap();
        let edited = IssueReport { summary: noise.clone(), description: format!("{} {noise}", r.description), ..r.clone() };
        let mutated = f.attachment_only.assign(&edited, text).unwrap();
        prop_assert_eq!(base.scores, mutated.scores);
    }
}
