//! Sentence-level explanation disagreement: corpus preparation, attribution
//! import, agreement metrics, embedding-based segmentation, and the global
//! and regional analyses built from them.

pub mod agreement;
pub mod attribution;
pub mod cli;
pub mod corpus;
pub mod kmeans;
pub mod pipeline;
pub mod preprocess;
pub mod segmentation;

use thiserror::Error;

pub use agreement::{AgreementMatrix, MetricId, RankBasis};
pub use attribution::{AggregationMode, AttributionStore, Explanation, MethodId, SegmentSource};
pub use corpus::{CleanArticle, RawArticle, SentenceSpan, TokenBudget};
pub use pipeline::{AnalysisConfig, Report};
pub use segmentation::{EmbeddingSet, SegmentationResult};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Attribution(#[from] attribution::AttributionError),
    #[error(transparent)]
    Agreement(#[from] agreement::AgreementError),
    #[error(transparent)]
    Segmentation(#[from] segmentation::SegmentationError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// True for failures reading or writing files, as opposed to bad input.
    pub fn is_io(&self) -> bool {
        use pipeline::PipelineError as P;
        matches!(
            self,
            Error::Corpus(corpus::CorpusError::Io { .. })
                | Error::Attribution(attribution::AttributionError::Io { .. })
                | Error::Segmentation(segmentation::SegmentationError::Io { .. })
                | Error::Pipeline(P::Io { .. })
                | Error::Pipeline(P::Corpus(corpus::CorpusError::Io { .. }))
                | Error::Pipeline(P::Attribution(attribution::AttributionError::Io { .. }))
                | Error::Pipeline(P::Segmentation(segmentation::SegmentationError::Io { .. }))
        )
    }
}
