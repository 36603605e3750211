use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ranking::{RankedList, ScoredId};

use super::flat::{dot_slices, FlatIndex, Similarity};
use super::provider::Embedding;

pub const DEFAULT_TREES: usize = 10;
pub const DEFAULT_LEAF_SIZE: usize = 16;
const SPLIT_ATTEMPTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        /// Unit normal of the hyperplane.
        normal: Vec<f64>,
        offset: f64,
        /// Child holding points with positive margin.
        above: usize,
        below: usize,
    },
    Leaf(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    /// `nodes[0]` is the root.
    nodes: Vec<Node>,
}

/// Forest of random-hyperplane trees over the rows of a [`FlatIndex`].
///
/// Each split picks two distinct items at random and uses the hyperplane
/// bisecting them: normal along their difference, through their midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RpForest {
    n_trees: usize,
    leaf_size: usize,
    seed: u64,
    n_items: usize,
    dim: usize,
    trees: Vec<Tree>,
}

impl RpForest {
    pub fn build(index: &FlatIndex, n_trees: usize, leaf_size: usize, seed: u64) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::invalid("cannot build a forest over zero items"));
        }
        if n_trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        if leaf_size < 2 {
            return Err(Error::invalid("leaf size must be at least 2"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all: Vec<u32> = (0..index.len() as u32).collect();
        let trees = (0..n_trees)
            .map(|_| build_tree(index, all.clone(), leaf_size, &mut rng))
            .collect();
        Ok(RpForest {
            n_trees,
            leaf_size,
            seed,
            n_items: index.len(),
            dim: index.dim(),
            trees,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Item ordinals per leaf, for each tree.
    pub fn leaves(&self) -> Vec<Vec<&[u32]>> {
        self.trees
            .iter()
            .map(|t| {
                t.nodes
                    .iter()
                    .filter_map(|n| match n {
                        Node::Leaf(items) => Some(items.as_slice()),
                        Node::Split { .. } => None,
                    })
                    .collect()
            })
            .collect()
    }

    /// Approximate top-k by dot product.
    ///
    /// All trees are descended together through one priority queue keyed by
    /// the smallest margin to any hyperplane crossed so far; leaves are
    /// collected until at least `search_k` distinct items are found or the
    /// trees are exhausted, and those candidates are ranked exactly.
    pub fn search(
        &self,
        index: &FlatIndex,
        q: &Embedding,
        k: usize,
        search_k: Option<usize>,
    ) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let search_k = search_k.unwrap_or(self.n_trees * k);
        if search_k < k {
            return Err(Error::invalid(format!("search_k {search_k} is below k {k}")));
        }
        if index.len() != self.n_items || index.dim() != self.dim {
            return Err(Error::invalid("forest was built over a different index"));
        }
        if q.dim() != self.dim {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {}",
                q.dim(),
                self.dim
            )));
        }
        let q = q.as_slice();

        let mut seen = vec![false; self.n_items];
        let mut candidates: Vec<u32> = Vec::new();
        let mut heap: BinaryHeap<QueueEntry> = (0..self.trees.len())
            .map(|tree| QueueEntry {
                priority: f64::INFINITY,
                tree,
                node: 0,
            })
            .collect();
        while candidates.len() < search_k {
            let Some(entry) = heap.pop() else { break };
            match &self.trees[entry.tree].nodes[entry.node] {
                Node::Leaf(items) => {
                    for &item in items {
                        if !std::mem::replace(&mut seen[item as usize], true) {
                            candidates.push(item);
                        }
                    }
                }
                Node::Split {
                    normal,
                    offset,
                    above,
                    below,
                } => {
                    let margin = dot_slices(q, normal) - offset;
                    heap.push(QueueEntry {
                        priority: entry.priority.min(margin),
                        tree: entry.tree,
                        node: *above,
                    });
                    heap.push(QueueEntry {
                        priority: entry.priority.min(-margin),
                        tree: entry.tree,
                        node: *below,
                    });
                }
            }
        }

        let scored = candidates
            .into_iter()
            .map(|i| ScoredId {
                id: index.ids()[i as usize].clone(),
                score: index.score_row(i as usize, q, Similarity::Dot, 0.0),
            })
            .collect();
        Ok(RankedList::from_candidates(scored, k))
    }
}

struct QueueEntry {
    priority: f64,
    tree: usize,
    node: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.tree.cmp(&self.tree))
            .then_with(|| other.node.cmp(&self.node))
    }
}

struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
}

fn sample_split(
    index: &FlatIndex,
    items: &[u32],
    rng: &mut ChaCha8Rng,
) -> Option<(Hyperplane, Vec<u32>, Vec<u32>)> {
    for _ in 0..SPLIT_ATTEMPTS {
        let i = rng.gen_range(0..items.len());
        let mut j = rng.gen_range(0..items.len() - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = (index.row(items[i] as usize), index.row(items[j] as usize));
        let mut normal: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let len = dot_slices(&normal, &normal).sqrt();
        if len == 0.0 {
            continue;
        }
        normal.iter_mut().for_each(|v| *v /= len);
        let midpoint: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        let offset = dot_slices(&normal, &midpoint);
        let (above, below): (Vec<u32>, Vec<u32>) = items
            .iter()
            .partition(|&&it| dot_slices(index.row(it as usize), &normal) - offset > 0.0);
        if !above.is_empty() && !below.is_empty() {
            return Some((Hyperplane { normal, offset }, above, below));
        }
    }
    None
}

fn build_tree(index: &FlatIndex, items: Vec<u32>, leaf_size: usize, rng: &mut ChaCha8Rng) -> Tree {
    let mut nodes = vec![Node::Leaf(Vec::new())];
    let mut pending = vec![(0usize, items)];
    while let Some((slot, items)) = pending.pop() {
        if items.len() <= leaf_size {
            nodes[slot] = Node::Leaf(items);
            continue;
        }
        match sample_split(index, &items, rng) {
            None => nodes[slot] = Node::Leaf(items),
            Some((plane, above_items, below_items)) => {
                let above = nodes.len();
                let below = above + 1;
                nodes.push(Node::Leaf(Vec::new()));
                nodes.push(Node::Leaf(Vec::new()));
                nodes[slot] = Node::Split {
                    normal: plane.normal,
                    offset: plane.offset,
                    above,
                    below,
                };
                pending.push((below, below_items));
                pending.push((above, above_items));
            }
        }
    }
    Tree { nodes }
}

pub fn build_forest(index: &FlatIndex, n_trees: usize, leaf_size: usize, seed: u64) -> Result<RpForest> {
    RpForest::build(index, n_trees, leaf_size, seed)
}

/// `search_k = None` uses `n_trees * k`.
pub fn forest_search(
    forest: &RpForest,
    index: &FlatIndex,
    q: &Embedding,
    k: usize,
    search_k: Option<usize>,
) -> Result<RankedList> {
    forest.search(index, q, k, search_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_index(n: usize, dim: usize, seed: u64) -> FlatIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..n)
            .map(|i| {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (format!("{i:05}"), Embedding::new(v).unwrap())
            })
            .collect();
        FlatIndex::new(entries).unwrap()
    }

    #[test]
    fn small_index_is_single_leaf() {
        let idx = random_index(10, 4, 1);
        let forest = build_forest(&idx, 3, 16, 7).unwrap();
        for tree in forest.leaves() {
            assert_eq!(tree.len(), 1);
            assert_eq!(tree[0].len(), 10);
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let idx = random_index(300, 8, 2);
        assert_eq!(build_forest(&idx, 5, 8, 42).unwrap(), build_forest(&idx, 5, 8, 42).unwrap());
        assert_ne!(build_forest(&idx, 5, 8, 42).unwrap(), build_forest(&idx, 5, 8, 43).unwrap());
    }

    #[test]
    fn every_item_in_exactly_one_leaf_per_tree() {
        let idx = random_index(500, 6, 3);
        let forest = build_forest(&idx, 4, 10, 9).unwrap();
        for tree in forest.leaves() {
            let mut all: Vec<u32> = tree.iter().flat_map(|l| l.iter().copied()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..500).collect::<Vec<u32>>());
            assert!(tree.iter().all(|l| !l.is_empty() && l.len() <= 10));
        }
    }

    #[test]
    fn identical_points_become_oversized_leaf() {
        let v = Embedding::new(vec![1.0, 2.0]).unwrap();
        let entries = (0..40).map(|i| (format!("{i}"), v.clone())).collect();
        let idx = FlatIndex::new(entries).unwrap();
        let forest = build_forest(&idx, 2, 4, 0).unwrap();
        assert_eq!(forest.leaves()[0], vec![&(0..40).collect::<Vec<u32>>()[..]]);
    }

    #[test]
    fn exhaustive_search_k_equals_flat() {
        let idx = random_index(400, 8, 4);
        let forest = build_forest(&idx, 10, 16, 42).unwrap();
        let q = Embedding::new(vec![0.3, -0.1, 0.9, 0.0, 0.2, -0.5, 0.4, 0.1]).unwrap();
        assert_eq!(
            forest.search(&idx, &q, 10, Some(400)).unwrap(),
            idx.search(&q, 10, Similarity::Dot).unwrap()
        );
    }

    #[test]
    fn argument_checks() {
        let idx = random_index(50, 4, 5);
        assert!(build_forest(&idx, 0, 16, 1).is_err());
        assert!(build_forest(&idx, 1, 1, 1).is_err());
        let forest = build_forest(&idx, 2, 4, 1).unwrap();
        let q = Embedding::new(vec![1.0; 4]).unwrap();
        assert!(forest.search(&idx, &q, 5, Some(3)).is_err());
        assert!(forest.search(&idx, &q, 0, None).is_err());
        assert!(forest
            .search(&idx, &Embedding::new(vec![1.0; 3]).unwrap(), 1, None)
            .is_err());
        let other = random_index(51, 4, 5);
        assert!(forest.search(&other, &q, 1, None).is_err());
    }
}
