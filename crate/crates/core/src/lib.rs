//! stancekit: sentiment analysis of threaded online discussions.
//!
//! The toolkit covers three connected tasks:
//!
//! * inducing a discussion-domain sentiment lexicon by label propagation
//!   over a graph of text units ([`lexicon`]),
//! * tagging utterance sequences with a five-point ordinal sentiment scale
//!   using a linear-chain CRF with isotonic weight constraints ([`icrf`]),
//! * classifying whole discussions as dispute / non-dispute from
//!   sentiment-flow features ([`dispute`]).
//!
//! [`corpus`] holds the data model and JSONL ingestion, [`features`] the
//! five utterance feature families, [`shallow`] the non-sequence baselines
//! and logistic regression, [`eval`] metrics and the cross-validation
//! harness, and [`synth`] deterministic synthetic corpora for tests and
//! demos.

pub mod corpus;
pub mod dispute;
mod error;
pub mod eval;
pub mod features;
pub mod icrf;
pub mod lexicon;
pub mod shallow;
pub mod synth;

pub use error::{Error, Result};
