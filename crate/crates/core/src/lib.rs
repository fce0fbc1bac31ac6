//! Iterative self-training for scientific named-entity recognition.
//!
//! A tagger trained on a small manually annotated set pseudo-labels a larger
//! corpus. Word scores are products of subword probabilities, low-confidence
//! words become `amb`, and BIO transition rules constrain decoding. The model
//! is then retrained on manual plus pseudo-labeled data, and the loop repeats.
//!
//! Modules, roughly in pipeline order:
//! - [`ingest`]: BibTeX → catalog CSV, PDF fetching, tokenization
//! - [`tag_schema`]: the 15-class BIO label space and its transition rules
//! - [`dataset`]: annotated paragraphs, corpus partition, splits, merging
//! - [`tagger`]: subword segmentation and the hashed-feature classifier
//! - [`autoannotate`]: word aggregation, confidence gate, constrained decoding
//! - [`selftrain`]: the train → annotate → retrain loop
//! - [`eval`]: metrics, bootstrap comparison, label counts, diff markup
//! - [`cli`]: the `sciner` command line

pub mod autoannotate;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod ingest;
pub mod selftrain;
pub mod synthetic;
pub mod tag_schema;
pub mod tagger;

pub use error::{Error, Result};
