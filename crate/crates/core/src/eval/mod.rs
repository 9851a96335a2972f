//! Evaluation protocol: weighted metrics, repeated holdout experiments,
//! rank-sum significance tests and timing.

mod experiment;
mod metrics;
mod timing;
mod wilcoxon;

pub use experiment::{
    run_experiment, split_for, ExperimentError, ExperimentResult, ExperimentSpec, KindOutcome,
    RepetitionResult, SummaryRow, Window,
};
pub use metrics::{from_confusion, score, ClassMetrics, EvalReport, MetricsError, Partition, WeightedMetrics};
pub use timing::{measure_timings, respond, Stats, TimingError, TimingPlan, TimingSamples, TimingStats};
pub use wilcoxon::{wilcoxon_rank_sum, Method as WilcoxonMethod, RankSumTest, WilcoxonError, EXACT_MAX_N};

/// Exact and normal-approximation variants, callable directly.
pub mod rank_sum {
    pub use super::wilcoxon::{exact, normal};
}
