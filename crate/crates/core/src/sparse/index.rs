use std::collections::{BTreeMap, HashMap};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::textkit::AnalysisChain;

/// Occurrences of one term in one chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    /// Ordinal of the chunk within the index.
    pub doc: u32,
    pub term_freq: u32,
    /// Token offsets, strictly increasing; `positions.len() == term_freq`.
    pub positions: Vec<u32>,
}

/// A chunk left out of the index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexWarning {
    pub chunk_id: String,
    pub reason: String,
}

/// Term → postings map with the corpus statistics used by the scorers.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub(crate) chain: AnalysisChain,
    pub(crate) doc_ids: Vec<String>,
    pub(crate) doc_len: Vec<u32>,
    pub(crate) postings: BTreeMap<String, Vec<Posting>>,
    pub(crate) warnings: Vec<IndexWarning>,
    pub(crate) id_lookup: HashMap<String, u32>,
    pub(crate) avg_len: f64,
}

impl InvertedIndex {
    /// Analyzes every chunk with `chain` and records term positions.
    ///
    /// Chunks that analyze to no tokens are skipped and reported in
    /// [`InvertedIndex::warnings`].
    pub fn build(corpus: &Corpus, chain: &AnalysisChain) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("cannot index an empty corpus"));
        }
        let mut doc_ids = Vec::with_capacity(corpus.len());
        let mut doc_len = Vec::with_capacity(corpus.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut warnings = Vec::new();

        for chunk in corpus.chunks() {
            let tokens = chain.analyze(&chunk.text);
            if tokens.is_empty() {
                log::warn!("chunk {:?} has no indexable tokens; skipped", chunk.id);
                warnings.push(IndexWarning {
                    chunk_id: chunk.id.clone(),
                    reason: "no tokens after analysis".into(),
                });
                continue;
            }
            let doc = doc_ids.len() as u32;
            let mut local: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
            for (pos, token) in tokens.iter().enumerate() {
                local.entry(token.as_str()).or_default().push(pos as u32);
            }
            for (term, positions) in local {
                postings.entry(term.to_string()).or_default().push(Posting {
                    doc,
                    term_freq: positions.len() as u32,
                    positions,
                });
            }
            doc_ids.push(chunk.id.clone());
            doc_len.push(tokens.len() as u32);
        }
        if doc_ids.is_empty() {
            return Err(Error::invalid("no chunk produced any tokens"));
        }
        Ok(Self::from_parts(chain.clone(), doc_ids, doc_len, postings, warnings))
    }

    pub(crate) fn from_parts(
        chain: AnalysisChain,
        doc_ids: Vec<String>,
        doc_len: Vec<u32>,
        postings: BTreeMap<String, Vec<Posting>>,
        warnings: Vec<IndexWarning>,
    ) -> Self {
        let id_lookup = doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        let total: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
        let avg_len = total as f64 / doc_len.len() as f64;
        InvertedIndex {
            chain,
            doc_ids,
            doc_len,
            postings,
            warnings,
            id_lookup,
            avg_len,
        }
    }

    pub fn chain(&self) -> &AnalysisChain {
        &self.chain
    }

    /// Number of indexed chunks (N).
    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    /// Mean analyzed chunk length (avg|C|).
    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn warnings(&self) -> &[IndexWarning] {
        &self.warnings
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    /// Number of chunks containing `term` (n_t).
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub(crate) fn ordinal(&self, chunk_id: &str) -> Result<u32> {
        self.id_lookup
            .get(chunk_id)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("chunk {chunk_id:?} is not in the index")))
    }

    /// Analyzed token count of a chunk (|C|, T_C).
    pub fn doc_len(&self, chunk_id: &str) -> Result<u32> {
        Ok(self.doc_len[self.ordinal(chunk_id)? as usize])
    }

    pub(crate) fn posting_for(&self, term: &str, doc: u32) -> Option<&Posting> {
        let list = self.postings(term);
        list.binary_search_by_key(&doc, |p| p.doc)
            .ok()
            .map(|i| &list[i])
    }

    pub(crate) fn doc_id(&self, doc: u32) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub(crate) fn doc_len_at(&self, doc: u32) -> u32 {
        self.doc_len[doc as usize]
    }
}

/// Free-function form of [`InvertedIndex::build`].
pub fn build_index(corpus: &Corpus, chain: &AnalysisChain) -> Result<InvertedIndex> {
    InvertedIndex::build(corpus, chain)
}
