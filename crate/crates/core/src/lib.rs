//! Two-stage classifier for short banking-transaction descriptions.
//!
//! Records first pass through an exact Jaccard similarity detector that
//! deduplicates the training data and answers near-duplicate queries
//! directly. Everything else reaches a one-vs-one linear SVM built over
//! category lexica, amount/date meta information and word/character
//! n-grams.
//!
//! The crate is organised by stage:
//!
//! - [`corpus`]: record schema, CSV ingestion, splits and a seeded
//!   synthetic corpus generator.
//! - [`preprocess`]: tokenization, stopword placeholders and proper-name tags.
//! - [`similarity`]: token-set signatures and the Jaccard store.
//! - [`lexicon`]: per-category unigram/bigram lexica.
//! - [`features`]: the frozen feature space and sparse vectors.
//! - [`svm`]: binary hinge-loss solver and one-vs-one voting.
//! - [`pipeline`]: end-to-end training, classification and model bundles.
//! - [`eval`]: confusion counts, macro metrics and split experiments.
//!
//! With the default `parallel` feature, batch work (pairwise SVM training,
//! vectorization, experiment cells) runs on the rayon global pool.
//! Building with `--no-default-features` gives the sequential fallback
//! with identical results.

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
mod exec;
pub mod features;
pub mod lexicon;
pub mod pipeline;
pub mod preprocess;
pub mod similarity;
pub mod svm;

pub use config::Config;
pub use corpus::{CategoryId, CategorySet, Dataset, SynthConfig, TransactionRecord};
pub use error::{Error, Result};
pub use pipeline::{classify, train_pipeline, Classification, ModelBundle, Stage, TrainReport};
pub use preprocess::{preprocess, GazetteerConfig, PreprocessedText};
