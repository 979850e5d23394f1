//! Question answering over collections of scanned form documents:
//! evaluation metrics, keyword-spotting retrieval, structured record
//! queries and a client for extractive QA models.

pub mod adapter;
pub mod context;
pub mod dataset;
pub mod error;
pub mod fixture;
pub mod hungarian;
pub mod metrics;
pub mod pipeline;
pub mod records;
pub mod scalar;
pub mod similarity;
pub mod textspot;

pub use adapter::{AdapterEndpoint, AdapterRequest, AdapterResponse, QaAdapter};
pub use context::serialize_context;
pub use dataset::{Collection, GroundTruthEntry, Question, Submission};
pub use error::{Error, Result};
pub use fixture::{generate_fixture, inject_answer_noise, Fixture, FixtureSpec};
pub use metrics::{anlsl, average_precision, evaluate, AnswerList, MetricReport, QuestionScore, DEFAULT_TAU};
pub use pipeline::{Pipeline, PipelineConfig, PipelineKind};
pub use records::{QueryEngine, Schema, StructuredQuery};
pub use scalar::Scalar;
pub use similarity::{levenshtein, nld, nls};
pub use textspot::{doc_confidence, rank_collection, DocumentOcr, KeywordSet, LexiconExtractor, DEFAULT_THETA};

/// Ranked document with double-precision confidence.
pub type RankedDoc = metrics::RankedDoc<f64>;
/// Ranked document with single-precision confidence.
pub type RankedDocF32 = metrics::RankedDoc<f32>;
/// Hungarian assignment over double-precision scores.
pub type Assignment = hungarian::Assignment<f64>;
/// Hungarian assignment over single-precision scores.
pub type AssignmentF32 = hungarian::Assignment<f32>;
