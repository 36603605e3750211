//! Embedding-based retrieval: providers, exact inner-product and cosine
//! search, and a random-projection forest for approximate search.

mod flat;
mod forest;
mod provider;

pub use flat::{cosine, dot, flat_search, FlatIndex, Similarity};
pub use forest::{build_forest, forest_search, RpForest, DEFAULT_LEAF_SIZE, DEFAULT_TREES};
pub use provider::{
    read_embeddings_jsonl, write_embeddings_jsonl, Embedding, EmbeddingProvider, FileBacked,
    HashedNGram, ProviderSpec,
};
