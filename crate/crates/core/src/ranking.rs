//! Ranked result lists shared by the sparse and dense retrievers.

use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredId {
    pub id: String,
    pub score: f64,
}

/// Top-k results: scores non-increasing, ties broken by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub k: usize,
    pub hits: Vec<ScoredId>,
}

/// Ordering used by every retriever: descending score, then ascending id.
pub fn rank_order(a: &ScoredId, b: &ScoredId) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.id.cmp(&b.id))
}

impl RankedList {
    /// Sorts `candidates` under the ranking rule and truncates to `k`.
    pub fn from_candidates(mut candidates: Vec<ScoredId>, k: usize) -> Self {
        if candidates.len() > k {
            // partial selection first; the tail never matters
            candidates.select_nth_unstable_by(k, rank_order);
            candidates.truncate(k);
        }
        candidates.sort_by(rank_order);
        RankedList { k, hits: candidates }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: &str, score: f64) -> ScoredId {
        ScoredId {
            id: id.to_string(),
            score,
        }
    }

    #[test]
    fn ties_break_by_id() {
        let list = RankedList::from_candidates(vec![s("b", 1.0), s("a", 1.0), s("c", 2.0)], 3);
        assert_eq!(list.ids(), vec!["c", "a", "b"]);
    }

    #[test]
    fn truncates_after_full_ordering() {
        let list = RankedList::from_candidates(
            vec![s("d", 0.5), s("b", 1.0), s("a", 1.0), s("c", 2.0)],
            2,
        );
        assert_eq!(list.ids(), vec!["c", "a"]);
        assert_eq!(list.k, 2);
    }
}
