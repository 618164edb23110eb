use crate::numcore::{NumError, Tape, Tensor, Var};

use super::config::pooled_size;
use super::{LayerGraph, ModelError};

/// Projections of one attention layer. `w3` and `edge_emb` are absent when
/// edge types are ablated.
#[derive(Clone, Copy, Debug)]
pub struct TgatWeights {
    pub w1: Var,
    pub w2: Var,
    pub w3: Option<Var>,
    /// One row per edge type, indexed by type code.
    pub edge_emb: Option<Var>,
    pub w4: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct TgatOutput {
    /// `K×d2` aggregated node features.
    pub hidden: Var,
    /// `E×1` attention weight per neighbor entry, aligned with the layer
    /// graph's edge order.
    pub attention: Var,
}

/// Unnormalized attention `LeakyReLU[(xh W1)(xt W2 + er W3)ᵀ]` for a single
/// head/neighbor pair of `1×d` rows.
pub fn attention_logit(
    tape: &mut Tape,
    xh: Var,
    xt: Var,
    er: Option<Var>,
    w: &TgatWeights,
    slope: f64,
) -> Result<Var, NumError> {
    let a = tape.matmul(xh, w.w1)?;
    let mut b = tape.matmul(xt, w.w2)?;
    if let (Some(er), Some(w3)) = (er, w.w3) {
        let r = tape.matmul(er, w3)?;
        b = tape.add(b, r)?;
    }
    let dot = tape.row_dot(a, b)?;
    tape.leaky_relu(dot, slope)
}

/// One typed graph attention layer over all nodes of `graph`.
///
/// Each node attends over its in-neighbors with a softmax of
/// [`attention_logit`] and sums their `W4` projections. A node with no
/// neighbors gets a zero row.
pub fn tgat_layer(
    tape: &mut Tape,
    graph: &LayerGraph,
    x: Var,
    w: &TgatWeights,
    slope: f64,
) -> Result<TgatOutput, NumError> {
    let k = graph.num_nodes();
    if tape.value(x).rows() != k {
        return Err(NumError::ShapeMismatch {
            op: "tgat_layer",
            left: tape.value(x).shape(),
            right: (k, tape.value(x).cols()),
        });
    }
    let p = tape.matmul(x, w.w1)?;
    let q = tape.matmul(x, w.w2)?;
    let m = tape.matmul(x, w.w4)?;
    let ph = tape.gather_rows(p, graph.heads().clone())?;
    let mut s = tape.gather_rows(q, graph.tails().clone())?;
    if let (Some(er), Some(w3)) = (w.edge_emb, w.w3) {
        let r = tape.matmul(er, w3)?;
        let re = tape.gather_rows(r, graph.types().clone())?;
        s = tape.add(s, re)?;
    }
    let logits = tape.row_dot(ph, s)?;
    let pi = tape.leaky_relu(logits, slope)?;
    let attention = tape.segment_softmax(pi, graph.offsets().clone())?;
    let mt = tape.gather_rows(m, graph.tails().clone())?;
    let weighted = tape.mul_column(mt, attention)?;
    let hidden = tape.scatter_add_rows(weighted, graph.heads().clone(), k)?;
    Ok(TgatOutput { hidden, attention })
}

/// Entity-specific measurement vector `θ = ReLU(e W5 + b5)`.
pub fn measurement_vector(tape: &mut Tape, e: Var, w5: Var, b5: Var) -> Result<Var, NumError> {
    let z = tape.matmul(e, w5)?;
    let z = tape.add_row(z, b5)?;
    tape.relu(z)
}

/// `K×1` node importance `|x̄h θᵀ| + mean over N(h) of |(x̄h − x̄t) wᵀ|`.
/// Without `w` only the first term is used.
pub fn importance_scores(
    tape: &mut Tape,
    graph: &LayerGraph,
    hidden: Var,
    theta: Var,
    w: Option<Var>,
) -> Result<Var, NumError> {
    let tt = tape.transpose(theta)?;
    let proj = tape.matmul(hidden, tt)?;
    let relevance = tape.abs(proj)?;
    let Some(w) = w else {
        return Ok(relevance);
    };
    let wt = tape.transpose(w)?;
    let xw = tape.matmul(hidden, wt)?;
    let at_head = tape.gather_rows(xw, graph.heads().clone())?;
    let at_tail = tape.gather_rows(xw, graph.tails().clone())?;
    let diff = tape.sub(at_head, at_tail)?;
    let diff = tape.abs(diff)?;
    let summed = tape.scatter_add_rows(diff, graph.heads().clone(), graph.num_nodes())?;
    let inv = tape.constant(graph.inverse_degree().clone())?;
    let diversity = tape.mul_column(summed, inv)?;
    tape.add(relevance, diversity)
}

/// Indices of the `k` largest scores, ties broken toward the smaller index,
/// returned in ascending index order.
pub fn top_k_select(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

#[derive(Clone, Debug)]
pub struct PooledLayer {
    pub graph: LayerGraph,
    /// Gated features of the kept nodes, `⌈αK⌉×d2`.
    pub features: Var,
    /// Kept node positions in the input graph, ascending.
    pub selected: Vec<usize>,
}

/// Gates every node by `σ(β)` and keeps the `⌈αK⌉` highest-scoring ones
/// together with the edges among them.
pub fn pgp_layer(
    tape: &mut Tape,
    graph: &LayerGraph,
    hidden: Var,
    beta: Var,
    alpha: f64,
) -> Result<PooledLayer, NumError> {
    let gate = tape.sigmoid(beta)?;
    let gated = tape.mul_column(hidden, gate)?;
    let keep = pooled_size(alpha, graph.num_nodes());
    let selected = top_k_select(tape.value(beta).data(), keep);
    tape.note_selection(&selected);
    let features = tape.gather_rows(gated, selected.clone())?;
    Ok(PooledLayer {
        graph: graph.induced(&selected),
        features,
        selected,
    })
}

/// `ReLU(colmax(X) W6 + b6)`; an empty node set reads out as if its max
/// were the zero row.
pub fn subgraph_readout(tape: &mut Tape, x: Var, w6: Var, b6: Var) -> Result<Var, NumError> {
    let pooled = tape.col_max(x)?;
    let z = tape.matmul(pooled, w6)?;
    let z = tape.add_row(z, b6)?;
    tape.relu(z)
}

/// `m ⊕ g² ⊕ … ⊕ g^{L+1}` as one row; `expected` is the number of layers.
pub fn fuse_representation(tape: &mut Tape, m: Var, readouts: &[Var], expected: usize) -> Result<Var, ModelError> {
    if readouts.len() != expected {
        return Err(ModelError::ReadoutCount {
            expected,
            got: readouts.len(),
        });
    }
    let mut parts = Vec::with_capacity(readouts.len() + 1);
    parts.push(m);
    parts.extend_from_slice(readouts);
    Ok(tape.concat_cols(&parts)?)
}

/// Constant zero row, used for cold-start embeddings.
pub(crate) fn zero_row(tape: &mut Tape, cols: usize) -> Result<Var, NumError> {
    tape.constant(Tensor::zeros(1, cols))
}
