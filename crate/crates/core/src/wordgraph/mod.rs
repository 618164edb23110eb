//! Typed graph-of-words construction.
//!
//! Nodes are the distinct keywords of one user's (or item's) training
//! reviews. Two keywords of the same review whose original token positions
//! differ by less than the window `ω` are linked by an earlier→later edge of
//! type forward and a later→earlier edge of type backward. Every node has a
//! self-loop.

mod build;
mod cache;

use std::io;

use thiserror::Error;

pub use build::{build_review_graph, graph_to_layer_input, GraphBuilder, TypedAdjacency, DEFAULT_MAX_NODES};
pub use cache::{GraphCache, GraphCacheKey};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("window size must be at least 2, got {0}")]
    OmegaTooSmall(u32),
    #[error("review {review} has non-increasing token positions")]
    PositionsNotIncreasing { review: usize },
    #[error("word id {word} is outside the embedding table ({rows} rows)")]
    UnknownWord { word: u32, rows: usize },
    #[error("graph cache i/o: {0}")]
    Io(#[from] io::Error),
    #[error("graph cache line {line}: {reason}")]
    BadFile { line: usize, reason: String },
}

/// Edge type with a stable integer code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum EdgeType {
    Forward = 0,
    Backward = 1,
    SelfLoop = 2,
}

impl EdgeType {
    pub const ALL: [EdgeType; 3] = [EdgeType::Forward, EdgeType::Backward, EdgeType::SelfLoop];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EdgeType::Forward),
            1 => Some(EdgeType::Backward),
            2 => Some(EdgeType::SelfLoop),
            _ => None,
        }
    }

    pub fn reverse(self) -> Self {
        match self {
            EdgeType::Forward => EdgeType::Backward,
            EdgeType::Backward => EdgeType::Forward,
            EdgeType::SelfLoop => EdgeType::SelfLoop,
        }
    }
}

/// Typed, directed, unweighted review graph of one user or item.
///
/// Edges are keyed by node positions `(from, to)`; nodes are sorted by
/// word id so the same documents always give the same layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReviewGraph {
    pub(crate) nodes: Vec<u32>,
    pub(crate) edges: std::collections::BTreeMap<(u32, u32), EdgeType>,
    pub(crate) omega: u32,
}

impl ReviewGraph {
    pub fn empty(omega: u32) -> Self {
        Self {
            nodes: Vec::new(),
            edges: Default::default(),
            omega,
        }
    }

    /// Builds a graph directly from nodes and an edge list. Intended for
    /// tests and hand-made fixtures; no structural invariants are enforced.
    pub fn from_parts(nodes: Vec<u32>, edges: impl IntoIterator<Item = (u32, u32, EdgeType)>, omega: u32) -> Self {
        Self {
            nodes,
            edges: edges.into_iter().map(|(a, b, t)| ((a, b), t)).collect(),
            omega,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Word ids, one per node.
    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    pub fn omega(&self) -> u32 {
        self.omega
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<EdgeType> {
        self.edges.get(&(from as u32, to as u32)).copied()
    }

    /// `(from, to, type)` in lexicographic `(from, to)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, EdgeType)> + '_ {
        self.edges
            .iter()
            .map(|(&(a, b), &t)| (a as usize, b as usize, t))
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn count(&self, ty: EdgeType) -> usize {
        self.edges.values().filter(|&&t| t == ty).count()
    }
}
