use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::ranking::{RankedList, ScoredId};

use super::index::InvertedIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdfVariant {
    /// `ln(N / (n_t + 1))`, the same IDF as TF-IDF. Can be negative.
    TfIdf,
    /// `ln(1 + (N - n_t + 0.5) / (n_t + 0.5))`, always positive.
    #[default]
    RobertsonLucene,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub idf: IdfVariant,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.2,
            b: 0.75,
            idf: IdfVariant::RobertsonLucene,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(Error::invalid(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::invalid(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scorer {
    TfIdf,
    Bm25(Bm25Params),
}

/// TF-IDF inverse document frequency, natural log.
pub fn tfidf_idf(num_docs: usize, doc_freq: usize) -> f64 {
    (num_docs as f64 / (doc_freq as f64 + 1.0)).ln()
}

pub fn bm25_idf(variant: IdfVariant, num_docs: usize, doc_freq: usize) -> f64 {
    let (n, df) = (num_docs as f64, doc_freq as f64);
    match variant {
        IdfVariant::TfIdf => tfidf_idf(num_docs, doc_freq),
        IdfVariant::RobertsonLucene => (1.0 + (n - df + 0.5) / (df + 0.5)).ln(),
    }
}

/// Saturated term-frequency factor of BM25.
pub fn bm25_tf(tf: f64, doc_len: f64, avg_len: f64, k1: f64, b: f64) -> f64 {
    tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc_len / avg_len))
}

impl InvertedIndex {
    /// Distinct analyzed query terms, in lexicographic order.
    pub fn query_terms(&self, query: &str) -> BTreeSet<String> {
        self.chain
            .analyze(query)
            .into_iter()
            .map(|t| t.into_string())
            .collect()
    }

    fn score_doc<'a>(
        &self,
        terms: impl IntoIterator<Item = &'a str>,
        doc: u32,
        scorer: &Scorer,
    ) -> f64 {
        let n = self.num_docs();
        let len = f64::from(self.doc_len_at(doc));
        let mut score = 0.0;
        for term in terms {
            let Some(posting) = self.posting_for(term, doc) else {
                continue;
            };
            let tf = f64::from(posting.term_freq);
            let df = self.doc_freq(term);
            score += match scorer {
                Scorer::TfIdf => (tf / len) * tfidf_idf(n, df),
                Scorer::Bm25(p) => {
                    bm25_idf(p.idf, n, df) * bm25_tf(tf, len, self.avg_len, p.k1, p.b)
                }
            };
        }
        score
    }

    /// Score of one chunk for a query under `scorer`.
    pub fn score(&self, query: &str, chunk_id: &str, scorer: &Scorer) -> Result<f64> {
        if let Scorer::Bm25(p) = scorer {
            p.validate()?;
        }
        let doc = self.ordinal(chunk_id)?;
        let terms = self.query_terms(query);
        Ok(self.score_doc(terms.iter().map(String::as_str), doc, scorer))
    }

    /// Ranks all chunks sharing a term with the query.
    ///
    /// Eligible chunks have a positive BM25 score, or a non-zero TF-IDF score
    /// (TF-IDF can go negative for terms present in every chunk).
    pub fn search(&self, query: &str, k: usize, scorer: &Scorer) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if let Scorer::Bm25(p) = scorer {
            p.validate()?;
        }
        let terms = self.query_terms(query);
        if terms.is_empty() {
            return Err(Error::invalid(format!(
                "query {query:?} has no terms after analysis"
            )));
        }
        let mut docs: Vec<u32> = terms
            .iter()
            .flat_map(|t| self.postings(t).iter().map(|p| p.doc))
            .collect();
        docs.sort_unstable();
        docs.dedup();

        let candidates = docs
            .into_iter()
            .filter_map(|doc| {
                let score = self.score_doc(terms.iter().map(String::as_str), doc, scorer);
                let eligible = match scorer {
                    Scorer::TfIdf => score != 0.0,
                    Scorer::Bm25(_) => score > 0.0,
                };
                eligible.then(|| ScoredId {
                    id: self.doc_id(doc).to_string(),
                    score,
                })
            })
            .collect();
        Ok(RankedList::from_candidates(candidates, k))
    }

    /// Chunks containing the analyzed phrase at consecutive positions,
    /// ranked by BM25 (default parameters) of the phrase terms.
    pub fn phrase_search(&self, phrase: &str, k: usize) -> Result<RankedList> {
        self.phrase_search_with(phrase, k, &Bm25Params::default())
    }

    pub fn phrase_search_with(
        &self,
        phrase: &str,
        k: usize,
        params: &Bm25Params,
    ) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        params.validate()?;
        let sequence: Vec<String> = self
            .chain
            .analyze(phrase)
            .into_iter()
            .map(|t| t.into_string())
            .collect();
        if sequence.is_empty() {
            return Err(Error::invalid(format!(
                "phrase {phrase:?} has no terms after analysis"
            )));
        }
        let terms: BTreeSet<&str> = sequence.iter().map(String::as_str).collect();
        let scorer = Scorer::Bm25(*params);
        let candidates = self
            .phrase_matches(&sequence)
            .into_iter()
            .filter_map(|doc| {
                let score = self.score_doc(terms.iter().copied(), doc, &scorer);
                (score > 0.0).then(|| ScoredId {
                    id: self.doc_id(doc).to_string(),
                    score,
                })
            })
            .collect();
        Ok(RankedList::from_candidates(candidates, k))
    }

    /// Ordinals of chunks where `sequence` occurs at consecutive positions.
    pub(crate) fn phrase_matches(&self, sequence: &[String]) -> Vec<u32> {
        let Some(first) = sequence.first() else {
            return Vec::new();
        };
        self.postings(first)
            .iter()
            .filter(|head| {
                let rest: Option<Vec<&super::Posting>> = sequence[1..]
                    .iter()
                    .map(|t| self.posting_for(t, head.doc))
                    .collect();
                let Some(rest) = rest else {
                    return false;
                };
                head.positions.iter().any(|&start| {
                    rest.iter().enumerate().all(|(i, p)| {
                        p.positions.binary_search(&(start + i as u32 + 1)).is_ok()
                    })
                })
            })
            .map(|p| p.doc)
            .collect()
    }
}

/// TF-IDF score of a chunk: sum over shared terms of `(f_t / |C|) * ln(N / (n_t + 1))`.
pub fn tfidf_score(index: &InvertedIndex, query: &str, chunk_id: &str) -> Result<f64> {
    index.score(query, chunk_id, &Scorer::TfIdf)
}

pub fn bm25_score(
    index: &InvertedIndex,
    query: &str,
    chunk_id: &str,
    params: &Bm25Params,
) -> Result<f64> {
    index.score(query, chunk_id, &Scorer::Bm25(*params))
}

pub fn search(index: &InvertedIndex, query: &str, k: usize, scorer: &Scorer) -> Result<RankedList> {
    index.search(query, k, scorer)
}

pub fn phrase_search(index: &InvertedIndex, phrase: &str, k: usize) -> Result<RankedList> {
    index.phrase_search(phrase, k)
}
