//! Text preparation and the per-channel tf-idf encoding.

use issue_triage::textprep::{self, PrepConfig};
use issue_triage::vectorizer::{TfIdfModel, TwoChannelModel, VectorizerConfig};

fn main() {
    let prep = PrepConfig { ngram_max: 2, ..PrepConfig::default() }.with_stopwords(["the", "is"]);
    let reports = [
        "Credit card limit is not updated",
        "The card screen freezes after login",
        "Loan approval stuck in the branch workflow",
    ];
    let screenshots = ["KART L1MIT EKRANI hata 404", "", "KRED1 ONAY bekliyor"];

    for r in &reports {
        println!("{r:?}\n  -> {:?}", textprep::terms(r, &prep));
    }

    let report_docs: Vec<Vec<String>> = reports.iter().map(|r| textprep::terms(r, &prep)).collect();
    let shot_docs: Vec<Vec<String>> = screenshots.iter().map(|s| textprep::terms(s, &prep)).collect();

    let single = TfIdfModel::fit(&report_docs).expect("non-empty corpus");
    println!("\nreport vocabulary: {} terms", single.dim());
    for t in ["card", "credit card", "loan"] {
        println!("  idf({t:?}) = {:.4}", single.idf(t).unwrap_or(f64::NAN));
    }

    let two = TwoChannelModel::fit(&report_docs, &shot_docs, VectorizerConfig::default()).expect("fit");
    println!("\ntwo channels: {} + {} columns", two.report_channel.dim(), two.attachment_channel.dim());
    for (i, (r, s)) in report_docs.iter().zip(&shot_docs).enumerate() {
        let v = two.transform(r, s);
        println!("  doc {i}: nnz {:>2}, squared norm {:.3}", v.nnz(), v.norm_squared());
    }
}
