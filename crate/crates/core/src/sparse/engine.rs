use std::collections::HashSet;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::ranking::{RankedList, ScoredId};
use crate::textkit::AnalysisChain;

use super::index::InvertedIndex;
use super::scoring::{Bm25Params, Scorer};

/// Embedded full-text engine: stemmed analysis, BM25 ranking and quoted
/// phrase constraints over an [`InvertedIndex`].
#[derive(Debug, Clone)]
pub struct SearchEngine {
    index: InvertedIndex,
    params: Bm25Params,
}

impl SearchEngine {
    pub fn build(corpus: &Corpus) -> Result<Self> {
        Self::with_chain(corpus, &AnalysisChain::index(), Bm25Params::default())
    }

    pub fn with_chain(corpus: &Corpus, chain: &AnalysisChain, params: Bm25Params) -> Result<Self> {
        params.validate()?;
        Ok(SearchEngine {
            index: InvertedIndex::build(corpus, chain)?,
            params,
        })
    }

    pub fn from_index(index: InvertedIndex, params: Bm25Params) -> Result<Self> {
        params.validate()?;
        Ok(SearchEngine { index, params })
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    /// Plain BM25 over every query term.
    pub fn search(&self, query: &str, k: usize) -> Result<RankedList> {
        self.index.search(query, k, &Scorer::Bm25(self.params))
    }

    pub fn phrase_search(&self, phrase: &str, k: usize) -> Result<RankedList> {
        self.index.phrase_search_with(phrase, k, &self.params)
    }

    /// Query-string search. Double-quoted segments are phrases every hit
    /// must contain; all terms (quoted or not) contribute to the BM25 score.
    ///
    /// `"fire exit" stairs` matches chunks containing the phrase "fire exit",
    /// ranked by BM25 of {fire, exit, stairs}.
    pub fn query(&self, query: &str, k: usize) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let phrases: Vec<Vec<String>> = query
            .split('"')
            .skip(1)
            .step_by(2)
            .map(|p| {
                self.index
                    .chain()
                    .analyze(p)
                    .into_iter()
                    .map(|t| t.into_string())
                    .collect::<Vec<_>>()
            })
            .filter(|p| !p.is_empty())
            .collect();
        if phrases.is_empty() {
            return self.search(query, k);
        }
        let all = self.index.search(query, self.index.num_docs(), &Scorer::Bm25(self.params))?;
        let mut allowed: Option<HashSet<u32>> = None;
        for phrase in &phrases {
            let docs: HashSet<u32> = self.index.phrase_matches(phrase).into_iter().collect();
            allowed = Some(match allowed {
                None => docs,
                Some(prev) => prev.intersection(&docs).copied().collect(),
            });
        }
        let allowed: HashSet<&str> = allowed
            .unwrap_or_default()
            .into_iter()
            .map(|d| self.index.doc_id(d))
            .collect();
        let hits: Vec<ScoredId> = all
            .hits
            .into_iter()
            .filter(|h| allowed.contains(h.id.as_str()))
            .collect();
        Ok(RankedList::from_candidates(hits, k))
    }
}
