//! Evaluation protocol: smoothed accuracy, shared thresholds and the cost
//! of first reaching them, plus the descent-direction diagnostic.

mod metrics;
mod similarity;

pub use metrics::{
    build_report, cost_to_target, final_accuracy, streak_completion, windowed_accuracy, CostKind,
    CostToTarget, MethodSummary, MetricPoint, MetricSeries, StreakBasis, ThresholdReport, STREAK,
    TARGET_FRACTION, WINDOW,
};
pub use similarity::{
    centralized_checkpoints, direction_similarity, run_similarity_study, CentralConfig,
    SimilarityPoint, DISPLACEMENT_EPS,
};
