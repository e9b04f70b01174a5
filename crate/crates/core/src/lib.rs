//! Extract-compose multi-document summarization for health and nutrition
//! text.
//!
//! The pipeline distills entity-relation-bearing spans from scientific
//! abstracts (`extract`), selects an ordered subset with a reward-trained
//! policy (`select`), fuses the selection through vocabulary-constrained
//! blank infilling (`fuse`), and scores outputs with knowledge-grounded
//! metrics (`metrics`). `corpus` holds the data model and ingestion,
//! `knowledge` the pluggable taggers and classifiers, and `pipeline` the
//! end-to-end orchestration and CLI surface.
//!
//! All numeric code is generic over [`num::Scalar`] (f32 or f64); the
//! aliases below fix the default precision used by the CLI.

pub mod corpus;
pub mod embed;
pub mod error;
pub mod extract;
pub mod fuse;
pub mod knowledge;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod num;
pub mod rng;
pub mod select;
pub mod text;

pub use error::{Error, Result};

/// Default scalar type for the shipped binary and checkpoints.
pub type F = f64;

pub type EmbeddingsF = embed::Embeddings<F>;
pub type ExtractionModelF = extract::ExtractionModel<F>;
pub type TextSpanF = extract::TextSpan<F>;
pub type KnowledgeModelsF = knowledge::KnowledgeModels<F>;
pub type PolicyParametersF = select::PolicyParameters<F>;
pub type BlankLmF = fuse::BlankLm<F>;
pub type MetricsReportF = metrics::MetricsReport<F>;
