//! Humanlikeness and analysis metrics.

pub mod bootstrap;
pub mod forgetting;
pub mod reranking;
pub mod text;
pub mod wasserstein;

pub use bootstrap::{bootstrap_ci, bootstrap_ci_paired};
pub use forgetting::{digit_alignment, error_pattern_stats, DigitAlignment, ErrorPatternStats};
pub use reranking::{pairwise_reranking_accuracy, DocAccuracyTable, DocRow, Variant};
pub use text::{bleu, free_recall_score, Embedder, FreeRecallScore, HttpEmbedder, TfEmbedder};
pub use wasserstein::{humanlikeness, wasserstein_1d, ScoreDistribution};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("empty sample")]
    EmptySample,
    #[error("score ranges differ: {0:?} vs {1:?}")]
    RangeMismatch((f64, f64), (f64, f64)),
    #[error("sample {value} outside range {range:?}")]
    OutOfRange { value: f64, range: (f64, f64) },
    #[error("no incorrect trials")]
    NoErrors,
    #[error("tables do not cover the same documents")]
    TableMismatch,
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),
}
