//! Metrics, few-shot protocol, retrieval consistency and ablation runs.

mod ablation;
mod consistency;
mod fewshot;
mod metrics;

pub use ablation::{run_ablation, AblationReport, VariantResult};
pub use consistency::{
    histogram_bin, retrieval_consistency, similarity_distribution, ConsistencyCurve,
    ConsistencyPoint, SimilarityDistribution, StratumStats, HISTOGRAM_BINS,
};
pub use fewshot::{few_shot, train_and_score, Splits, FewShotConfig, FewShotPoint, FewShotReport, DEFAULT_SHOTS};
pub use metrics::{
    compute_binary_metrics, compute_metrics, confusion_matrix, metrics_for_task, MetricsBundle,
};
