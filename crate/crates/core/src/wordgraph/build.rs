use std::collections::{BTreeMap, HashMap};

use super::{EdgeType, GraphError, ReviewGraph};
use crate::ingest::Review;
use crate::numcore::Tensor;
use crate::seeds::stable_hash;

/// Largest node count kept per graph; the most frequent keywords win.
pub const DEFAULT_MAX_NODES: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphBuilder {
    pub omega: u32,
    /// Seed of the coin that orients pairs seen in both orders.
    pub coin_seed: u64,
    pub max_nodes: usize,
}

impl GraphBuilder {
    pub fn new(omega: u32, coin_seed: u64) -> Self {
        Self {
            omega,
            coin_seed,
            max_nodes: DEFAULT_MAX_NODES,
        }
    }

    fn coin(&self, lo: u32, hi: u32) -> bool {
        stable_hash(self.coin_seed, &[&lo.to_le_bytes(), &hi.to_le_bytes()]) & 1 == 0
    }

    pub fn build(&self, reviews: &[Review]) -> Result<ReviewGraph, GraphError> {
        if self.omega < 2 {
            return Err(GraphError::OmegaTooSmall(self.omega));
        }
        let mut freq: HashMap<u32, usize> = HashMap::new();
        for (ri, r) in reviews.iter().enumerate() {
            if r.positions.windows(2).any(|w| w[0] >= w[1]) || r.words.len() != r.positions.len() {
                return Err(GraphError::PositionsNotIncreasing { review: ri });
            }
            for &w in &r.words {
                *freq.entry(w).or_default() += 1;
            }
        }
        let mut kept: Vec<u32> = freq.keys().copied().collect();
        if kept.len() > self.max_nodes {
            kept.sort_by(|a, b| freq[b].cmp(&freq[a]).then(a.cmp(b)));
            kept.truncate(self.max_nodes);
        }
        kept.sort_unstable();
        let slot: HashMap<u32, u32> = kept
            .iter()
            .enumerate()
            .map(|(i, &w)| (w, i as u32))
            .collect();

        // Orientation per unordered word pair: Some((from, to)) until a
        // conflicting occurrence is seen, then None (settled by the coin).
        let mut pairs: BTreeMap<(u32, u32), Option<(u32, u32)>> = BTreeMap::new();
        let omega = self.omega;
        for r in reviews {
            for i in 0..r.words.len() {
                let (a, pa) = (r.words[i], r.positions[i]);
                if !slot.contains_key(&a) {
                    continue;
                }
                for j in i + 1..r.words.len() {
                    if r.positions[j] - pa >= omega {
                        break;
                    }
                    let b = r.words[j];
                    if a == b || !slot.contains_key(&b) {
                        continue;
                    }
                    let key = (a.min(b), a.max(b));
                    pairs
                        .entry(key)
                        .and_modify(|o| {
                            if *o != Some((a, b)) {
                                *o = None;
                            }
                        })
                        .or_insert(Some((a, b)));
                }
            }
        }

        let mut edges = BTreeMap::new();
        for (i, _) in kept.iter().enumerate() {
            edges.insert((i as u32, i as u32), EdgeType::SelfLoop);
        }
        for ((lo, hi), orient) in pairs {
            let (from, to) = orient.unwrap_or_else(|| if self.coin(lo, hi) { (lo, hi) } else { (hi, lo) });
            let (f, t) = (slot[&from], slot[&to]);
            edges.insert((f, t), EdgeType::Forward);
            edges.insert((t, f), EdgeType::Backward);
        }
        Ok(ReviewGraph {
            nodes: kept,
            edges,
            omega,
        })
    }
}

/// Builds the review graph of one entity with the default node cap.
pub fn build_review_graph(reviews: &[Review], omega: u32, coin_seed: u64) -> Result<ReviewGraph, GraphError> {
    GraphBuilder::new(omega, coin_seed).build(reviews)
}

/// Dense `K×K` typed adjacency; entry `(from, to)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedAdjacency {
    k: usize,
    entries: Vec<Option<EdgeType>>,
}

impl TypedAdjacency {
    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, from: usize, to: usize) -> Option<EdgeType> {
        self.entries[from * self.k + to]
    }

    pub fn non_empty(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }
}

/// Typed adjacency plus the `K×d₀` feature matrix whose row `h` is the
/// embedding of node `h`'s word.
pub fn graph_to_layer_input(graph: &ReviewGraph, embeddings: &Tensor) -> Result<(TypedAdjacency, Tensor), GraphError> {
    let k = graph.num_nodes();
    let mut features = Tensor::zeros(k, embeddings.cols());
    for (h, &w) in graph.nodes().iter().enumerate() {
        if w as usize >= embeddings.rows() {
            return Err(GraphError::UnknownWord {
                word: w,
                rows: embeddings.rows(),
            });
        }
        features.row_mut(h).copy_from_slice(embeddings.row(w as usize));
    }
    let mut entries = vec![None; k * k];
    for (a, b, t) in graph.edges() {
        entries[a * k + b] = Some(t);
    }
    Ok((TypedAdjacency { k, entries }, features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn review(words: &[u32], positions: &[u32]) -> Review {
        Review {
            words: words.to_vec(),
            positions: positions.to_vec(),
        }
    }

    /// O(n²) enumeration of every ordered pair inside the window.
    fn brute_pairs(r: &Review, omega: u32) -> BTreeSet<(u32, u32)> {
        let mut out = BTreeSet::new();
        for i in 0..r.len() {
            for j in 0..r.len() {
                if i < j && r.positions[j] - r.positions[i] < omega && r.words[i] != r.words[j] {
                    out.insert((r.words[i], r.words[j]));
                }
            }
        }
        out
    }

    fn word_edges(g: &ReviewGraph, ty: EdgeType) -> BTreeSet<(u32, u32)> {
        g.edges()
            .filter(|e| e.2 == ty)
            .map(|(a, b, _)| (g.nodes()[a], g.nodes()[b]))
            .collect()
    }

    #[test]
    fn single_word_review() {
        let g = build_review_graph(&[review(&[4], &[0])], 3, 0).unwrap();
        assert_eq!(g.num_nodes(), 1);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.edge(0, 0), Some(EdgeType::SelfLoop));
    }

    #[test]
    fn empty_documents_give_empty_graph() {
        let g = build_review_graph(&[], 3, 0).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(build_review_graph(&[], 1, 0), Err(GraphError::OmegaTooSmall(1))));
        let bad = review(&[1, 2], &[3, 3]);
        assert!(matches!(
            build_review_graph(&[bad], 3, 0),
            Err(GraphError::PositionsNotIncreasing { review: 0 })
        ));
    }

    #[test]
    fn conflicting_orders_use_the_seeded_coin() {
        let docs = [review(&[1, 2], &[0, 1]), review(&[2, 1], &[0, 1])];
        let mut seen = BTreeSet::new();
        for seed in 0..16 {
            let g = build_review_graph(&docs, 3, seed).unwrap();
            assert_eq!(g.count(EdgeType::Forward), 1);
            assert_eq!(g, build_review_graph(&docs, 3, seed).unwrap());
            seen.insert(word_edges(&g, EdgeType::Forward));
        }
        // Both orientations occur across seeds.
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn agreeing_repeats_do_not_duplicate() {
        let docs = [review(&[1, 2], &[0, 1]), review(&[1, 2], &[0, 2])];
        let g = build_review_graph(&docs, 3, 9).unwrap();
        assert_eq!(word_edges(&g, EdgeType::Forward), BTreeSet::from([(1, 2)]));
        assert_eq!(g.num_edges(), 4);
    }

    #[test]
    fn node_cap_keeps_most_frequent() {
        let docs = [review(&[5, 6, 7, 5, 6, 5], &[0, 1, 2, 3, 4, 5])];
        let g = GraphBuilder {
            omega: 3,
            coin_seed: 0,
            max_nodes: 2,
        }
        .build(&docs)
        .unwrap();
        assert_eq!(g.nodes(), &[5, 6]);
    }

    #[test]
    fn layer_input_rows_follow_nodes() {
        let g = build_review_graph(&[review(&[2], &[0])], 3, 0).unwrap();
        let table = Tensor::from_rows(&[&[0.0; 4], &[1.0; 4], &[0.5, -1.0, 2.0, 3.0]]);
        let (adj, x) = graph_to_layer_input(&g, &table).unwrap();
        assert_eq!(x, Tensor::from_rows(&[&[0.5, -1.0, 2.0, 3.0]]));
        assert_eq!(adj.get(0, 0), Some(EdgeType::SelfLoop));
        let small = Tensor::zeros(2, 4);
        assert!(matches!(
            graph_to_layer_input(&g, &small),
            Err(GraphError::UnknownWord { word: 2, rows: 2 })
        ));
    }

    fn arb_review(max_len: usize) -> impl Strategy<Value = Review> {
        prop::collection::vec((0u32..15, 1u32..4), 0..max_len).prop_map(|items| {
            let mut pos = 0;
            let mut r = Review::default();
            for (w, gap) in items {
                pos += gap;
                r.words.push(w);
                r.positions.push(pos);
            }
            r
        })
    }

    proptest! {
        #[test]
        fn single_review_matches_pair_enumeration(r in arb_review(12), omega in 2u32..6, seed in any::<u64>()) {
            // Distinct words so no pair can be seen in both orders.
            let mut seen = BTreeSet::new();
            let r = {
                let mut d = Review::default();
                for (w, p) in r.words.iter().zip(&r.positions) {
                    if seen.insert(*w) {
                        d.words.push(*w);
                        d.positions.push(*p);
                    }
                }
                d
            };
            let g = build_review_graph(std::slice::from_ref(&r), omega, seed).unwrap();
            let fwd = brute_pairs(&r, omega);
            prop_assert_eq!(word_edges(&g, EdgeType::Forward), fwd.clone());
            let bwd: BTreeSet<(u32, u32)> = fwd.iter().map(|&(a, b)| (b, a)).collect();
            prop_assert_eq!(word_edges(&g, EdgeType::Backward), bwd);
            prop_assert_eq!(g.count(EdgeType::SelfLoop), g.num_nodes());
        }

        #[test]
        fn structural_invariants(docs in prop::collection::vec(arb_review(10), 0..5), omega in 2u32..6, seed in any::<u64>()) {
            let g = build_review_graph(&docs, omega, seed).unwrap();
            let distinct: BTreeSet<u32> = docs.iter().flat_map(|r| r.words.iter().copied()).collect();
            prop_assert_eq!(g.num_nodes(), distinct.len());
            for (a, b, t) in g.edges() {
                if a == b {
                    prop_assert_eq!(t, EdgeType::SelfLoop);
                } else {
                    prop_assert_ne!(t, EdgeType::SelfLoop);
                    prop_assert_eq!(g.edge(b, a), Some(t.reverse()));
                }
            }
            for h in 0..g.num_nodes() {
                prop_assert_eq!(g.edge(h, h), Some(EdgeType::SelfLoop));
            }
            prop_assert_eq!(&g, &build_review_graph(&docs, omega, seed).unwrap());
        }

        #[test]
        fn window_monotonic(docs in prop::collection::vec(arb_review(10), 0..5), omega in 2u32..6, seed in any::<u64>()) {
            let small = build_review_graph(&docs, omega, seed).unwrap();
            let large = build_review_graph(&docs, omega + 1, seed).unwrap();
            let pairs = |g: &ReviewGraph| -> BTreeSet<(u32, u32)> {
                g.edges().map(|(a, b, _)| (g.nodes()[a], g.nodes()[b])).collect()
            };
            prop_assert!(pairs(&small).is_subset(&pairs(&large)));
        }
    }
}
