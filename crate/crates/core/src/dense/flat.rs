use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::ranking::{RankedList, ScoredId};

use super::provider::{Embedding, EmbeddingProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Similarity {
    Dot,
    Cosine,
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot_slices(a, a).sqrt()
}

/// Inner product `q · p`.
pub fn dot(q: &Embedding, p: &Embedding) -> Result<f64> {
    check_dims(q.dim(), p.dim())?;
    Ok(dot_slices(q.as_slice(), p.as_slice()))
}

/// `q · p / (‖q‖ ‖p‖)`; undefined (an error) when either norm is zero.
pub fn cosine(q: &Embedding, p: &Embedding) -> Result<f64> {
    check_dims(q.dim(), p.dim())?;
    let (nq, np) = (q.norm(), p.norm());
    if nq == 0.0 || np == 0.0 {
        return Err(Error::invalid("cosine is undefined for a zero vector"));
    }
    Ok(dot_slices(q.as_slice(), p.as_slice()) / (nq * np))
}

/// Exhaustively searched vector store, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
    norms: Vec<f64>,
}

impl FlatIndex {
    pub fn new(entries: Vec<(String, Embedding)>) -> Result<Self> {
        let dim = entries
            .first()
            .map(|(_, e)| e.dim())
            .ok_or_else(|| Error::invalid("flat index needs at least one vector"))?;
        let mut ids = Vec::with_capacity(entries.len());
        let mut data = Vec::with_capacity(entries.len() * dim);
        let mut seen = HashSet::new();
        for (id, emb) in entries {
            check_dims(dim, emb.dim())?;
            if !seen.insert(id.clone()) {
                return Err(Error::invalid(format!("duplicate id {id:?}")));
            }
            ids.push(id);
            data.extend_from_slice(emb.as_slice());
        }
        let norms = data.chunks_exact(dim).map(norm).collect();
        Ok(FlatIndex {
            ids,
            dim,
            data,
            norms,
        })
    }

    /// Embeds every `(id, text)` pair with `provider`.
    pub fn from_texts<'a, I>(provider: &dyn EmbeddingProvider, texts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let entries = texts
            .into_iter()
            .map(|(id, text)| Ok((id.to_string(), provider.embed(text)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn score_row(&self, i: usize, q: &[f64], metric: Similarity, q_norm: f64) -> f64 {
        let d = dot_slices(q, self.row(i));
        match metric {
            Similarity::Dot => d,
            Similarity::Cosine => d / (q_norm * self.norms[i]),
        }
    }

    pub fn search(&self, q: &Embedding, k: usize, metric: Similarity) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        check_dims(self.dim, q.dim())?;
        let q_norm = q.norm();
        if metric == Similarity::Cosine {
            if q_norm == 0.0 {
                return Err(Error::invalid("cosine search with a zero query vector"));
            }
            if let Some(i) = self.norms.iter().position(|&n| n == 0.0) {
                return Err(Error::invalid(format!(
                    "cosine search over zero vector {:?}",
                    self.ids[i]
                )));
            }
        }
        let candidates = (0..self.len())
            .map(|i| ScoredId {
                id: self.ids[i].clone(),
                score: self.score_row(i, q.as_slice(), metric, q_norm),
            })
            .collect();
        Ok(RankedList::from_candidates(candidates, k))
    }
}

pub fn flat_search(
    index: &FlatIndex,
    q: &Embedding,
    k: usize,
    metric: Similarity,
) -> Result<RankedList> {
    index.search(q, k, metric)
}
