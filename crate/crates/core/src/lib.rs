//! Retrieval and evaluation toolkit for question answering over regulatory
//! text corpora.
//!
//! The crate is organised around the stages of a retrieval-augmented QA
//! pipeline:
//!
//! - [`textkit`]: tokenization, case folding, Porter stemming, n-grams.
//! - [`corpus`]: context/question/answer datasets, cleaning, statistics, and
//!   chunked retrieval corpora.
//! - [`sparse`]: inverted index with TF-IDF, BM25 and phrase search, plus a
//!   small search engine wrapper and a versioned on-disk format.
//! - [`dense`]: embedding providers, exact inner-product / cosine search and
//!   a random-projection forest for approximate search.
//! - [`metrics`]: token F1, BLEU, ROUGE-1, sentence mover's similarity,
//!   METEOR and greedy embedding matching.
//! - [`lora`]: a low-rank adapter over a frozen linear map.
//! - [`bench`]: top-k retrieval benchmarks and pre/post generation
//!   comparisons, rendered as CSV or Markdown.

pub mod bench;
pub mod corpus;
pub mod dense;
pub mod error;
pub mod lora;
pub mod metrics;
pub mod ranking;
pub mod sparse;
pub mod textkit;

pub use error::{Error, Result};
pub use ranking::{RankedList, ScoredId};
