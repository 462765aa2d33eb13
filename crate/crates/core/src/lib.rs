//! Weakly-supervised procedural knowledge extraction from interview transcripts.
//!
//! The pipeline parses structured protocols into step graphs, projects their phrases onto
//! transcript spans, derives tagging and span-pair datasets from the projection, trains a
//! linear-chain CRF and a relation classifier, and assembles predictions into a flowchart.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`.

pub mod corpus;
pub mod crf;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod fixtures;
pub mod iobes;
pub mod matcher;
pub mod num;
pub mod pipeline;
pub mod protocol;
pub mod relation;
pub mod rules;

pub use error::{Error, Result};
pub use num::Scalar;

pub type Vector64 = embeddings::Vector<f64>;
pub type Embeddings = embeddings::EmbeddingTable<f64>;
pub type Embeddings32 = embeddings::EmbeddingTable<f32>;
pub type Crf = crf::CrfModel<f64>;
pub type Crf32 = crf::CrfModel<f32>;
pub type ReClassifier = relation::ReModel<f64>;
pub type ReClassifier32 = relation::ReModel<f32>;
