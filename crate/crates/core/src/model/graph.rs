use std::sync::Arc;

use crate::numcore::Tensor;
use crate::wordgraph::{EdgeType, ReviewGraph, TypedAdjacency};

use super::Ablations;

/// Sparse, head-sorted neighbor lists for one layer.
///
/// Entry `e` says that node `tails[e]` is an in-neighbor of `heads[e]` through
/// an edge of type `types[e]` (the type of the edge `tail → head`). Entries
/// for head `h` occupy `offsets[h]..offsets[h + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGraph {
    num_nodes: usize,
    heads: Arc<[usize]>,
    tails: Arc<[usize]>,
    types: Arc<[usize]>,
    offsets: Arc<[usize]>,
    inv_degree: Tensor,
}

impl LayerGraph {
    /// Builds from `(tail, head, type)` triples. Duplicate pairs keep the
    /// first type seen.
    pub fn from_edges(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, EdgeType)>) -> Self {
        let mut list: Vec<(usize, usize, usize)> = edges
            .into_iter()
            .map(|(t, h, ty)| {
                assert!(t < num_nodes && h < num_nodes, "edge ({t}, {h}) outside {num_nodes} nodes");
                (h, t, ty.code() as usize)
            })
            .collect();
        list.sort_by_key(|&(h, t, _)| (h, t));
        list.dedup_by_key(|&mut (h, t, _)| (h, t));

        let mut offsets = vec![0usize; num_nodes + 1];
        for &(h, _, _) in &list {
            offsets[h + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let inv: Vec<f64> = offsets
            .windows(2)
            .map(|w| if w[1] > w[0] { 1.0 / (w[1] - w[0]) as f64 } else { 0.0 })
            .collect();
        Self {
            num_nodes,
            heads: list.iter().map(|e| e.0).collect(),
            tails: list.iter().map(|e| e.1).collect(),
            types: list.iter().map(|e| e.2).collect(),
            offsets: offsets.into(),
            inv_degree: Tensor::from_vec(num_nodes, 1, inv).expect("one entry per node"),
        }
    }

    /// Neighbor lists of a review graph with the ablation's edge types
    /// removed up front.
    pub fn from_review(graph: &ReviewGraph, ablations: &Ablations) -> Self {
        let keep = |ty: EdgeType| match ty {
            EdgeType::Forward => !ablations.drop_forward,
            EdgeType::Backward => !ablations.drop_backward,
            EdgeType::SelfLoop => !ablations.drop_self_loop,
        };
        let g = Self::from_edges(
            graph.num_nodes(),
            graph.edges().filter(|&(_, _, ty)| keep(ty)),
        );
        let isolated = g.isolated();
        if isolated > 0 {
            log::debug!("{isolated} of {} nodes have no in-neighbors", g.num_nodes);
        }
        g
    }

    pub fn from_adjacency(adj: &TypedAdjacency) -> Self {
        let n = adj.size();
        let mut edges = Vec::new();
        for from in 0..n {
            for to in 0..n {
                if let Some(ty) = adj.get(from, to) {
                    edges.push((from, to, ty));
                }
            }
        }
        Self::from_edges(n, edges)
    }

    /// Subgraph induced by `keep` (ascending, distinct); node `keep[i]`
    /// becomes node `i`.
    pub fn induced(&self, keep: &[usize]) -> Self {
        let mut remap = vec![usize::MAX; self.num_nodes];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let edges = (0..self.heads.len()).filter_map(|e| {
            let (h, t) = (remap[self.heads[e]], remap[self.tails[e]]);
            (h != usize::MAX && t != usize::MAX)
                .then(|| (t, h, EdgeType::from_code(self.types[e] as u8).expect("valid code")))
        });
        Self::from_edges(keep.len(), edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.heads.len()
    }

    pub fn heads(&self) -> &Arc<[usize]> {
        &self.heads
    }

    pub fn tails(&self) -> &Arc<[usize]> {
        &self.tails
    }

    pub fn types(&self) -> &Arc<[usize]> {
        &self.types
    }

    pub fn offsets(&self) -> &Arc<[usize]> {
        &self.offsets
    }

    /// `1/|N(h)|` per node, zero for nodes without neighbors.
    pub fn inverse_degree(&self) -> &Tensor {
        &self.inv_degree
    }

    /// In-neighbors of `h` with the connecting edge types.
    pub fn neighbors(&self, h: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.offsets[h]..self.offsets[h + 1]).map(|e| (self.tails[e], self.types[e]))
    }

    /// Nodes with an empty neighborhood.
    pub fn isolated(&self) -> usize {
        self.offsets.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

/// A review graph prepared for the forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct EntityGraph {
    /// Word id of each node.
    pub words: Vec<u32>,
    pub layer: LayerGraph,
}

impl EntityGraph {
    pub fn prepare(graph: &ReviewGraph, ablations: &Ablations) -> Self {
        Self {
            words: graph.nodes().to_vec(),
            layer: LayerGraph::from_review(graph, ablations),
        }
    }

    pub fn empty() -> Self {
        Self {
            words: Vec::new(),
            layer: LayerGraph::from_edges(0, std::iter::empty()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ReviewGraph {
        use EdgeType::*;
        ReviewGraph::from_parts(
            vec![10, 20, 30],
            [
                (0, 0, SelfLoop),
                (1, 1, SelfLoop),
                (2, 2, SelfLoop),
                (0, 1, Forward),
                (1, 0, Backward),
                (1, 2, Forward),
                (2, 1, Backward),
            ],
            3,
        )
    }

    #[test]
    fn neighbors_use_incoming_edge_type() {
        let g = LayerGraph::from_review(&sample(), &Ablations::default());
        assert_eq!(g.num_edges(), 7);
        let n1: Vec<_> = g.neighbors(1).collect();
        assert_eq!(n1, vec![(0, 0), (1, 2), (2, 1)]);
        assert_eq!(g.inverse_degree().data(), &[0.5, 1.0 / 3.0, 0.5]);
    }

    #[test]
    fn dropping_types_filters_edges() {
        let ab = Ablations {
            drop_self_loop: true,
            ..Default::default()
        };
        let g = LayerGraph::from_review(&sample(), &ab);
        assert_eq!(g.num_edges(), 4);
        assert!(g.types().iter().all(|&t| t != 2));
        let ab = Ablations {
            drop_forward: true,
            drop_backward: true,
            ..Default::default()
        };
        let g = LayerGraph::from_review(&sample(), &ab);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.isolated(), 0);
    }

    #[test]
    fn induced_subgraph_reindexes() {
        let g = LayerGraph::from_review(&sample(), &Ablations::default());
        let s = g.induced(&[1, 2]);
        assert_eq!(s.num_nodes(), 2);
        let n0: Vec<_> = s.neighbors(0).collect();
        assert_eq!(n0, vec![(0, 2), (1, 1)]);
        let n1: Vec<_> = s.neighbors(1).collect();
        assert_eq!(n1, vec![(0, 0), (1, 2)]);
        let none = g.induced(&[]);
        assert_eq!(none.num_nodes(), 0);
        assert_eq!(none.offsets().as_ref(), &[0]);
    }
}
