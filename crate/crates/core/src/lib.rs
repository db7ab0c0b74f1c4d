//! Emoji semantics across cultures: corpus ingestion, CBOW embeddings,
//! lexicon projection and cross-cultural correlation analytics.

pub mod analytics;
pub mod charts;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod emoji;
pub mod error;
pub mod lexicon;
pub mod pipeline;
pub mod projection;
pub mod report;

pub use error::{Error, Result};
