//! Mining, filtering, deduplicating and evaluating explanatory code
//! documentation.
//!
//! The pieces compose into [`pipeline::run_pipeline`], but each module is
//! usable on its own.

pub mod agreement;
pub mod annotation;
pub mod dedup;
pub mod extract;
pub mod filter;
pub mod jsonl;
pub mod metrics;
pub mod pipeline;

pub use agreement::{kendall_tau, AgreementResult, AgreementTable, ScoredExample, TauMode};
pub use annotation::{AnnotationRecord, AnnotationStore, Campaign, EvalAssignment, EvalRating, Protocol, SpanLink};
pub use dedup::{levenshtein, CorpusIndex, DedupConfig, DedupField, DedupReport};
pub use extract::{CodeDocPair, FunctionUnit, Grammar, PythonGrammar, RepoManifest, SourceFile};
pub use filter::{QualityScores, RuleFilterConfig, Scale, ScoreFilterConfig, ScoreRecord, Scorer};
pub use metrics::{AggregateReport, Candidate, EmbeddingProvider, MetricReport};
pub use pipeline::{run_pipeline, CorpusStats, PipelineConfig, PipelineError};
