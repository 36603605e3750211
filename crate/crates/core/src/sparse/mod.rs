//! Term-based retrieval: inverted index, TF-IDF and BM25 scoring, phrase
//! matching and a persisted index format.

mod engine;
mod index;
mod persist;
mod scoring;

pub use engine::SearchEngine;
pub use index::{build_index, IndexWarning, InvertedIndex, Posting};
pub use persist::{MAGIC, VERSION};
pub use scoring::{
    bm25_idf, bm25_score, bm25_tf, phrase_search, search, tfidf_idf, tfidf_score, Bm25Params,
    IdfVariant, Scorer,
};
