use std::fmt;

use crate::numcore::{ParameterStore, Tape, Var};

use super::layers::{self, zero_row, TgatWeights};
use super::params::param_name;
use super::{EntityGraph, FmWeights, ModelConfig, ModelError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::User, Side::Item];

    pub fn name(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }

    fn embedding_table(self) -> &'static str {
        match self {
            Side::User => "user_emb",
            Side::Item => "item_emb",
        }
    }

    fn bias_table(self) -> &'static str {
        match self {
            Side::User => "fm.user_bias",
            Side::Item => "fm.item_bias",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One side of a prediction: the entity's table row (`None` for entities
/// unseen in training) and its prepared review graph.
#[derive(Clone, Copy, Debug)]
pub struct EntityInput<'a> {
    pub row: Option<usize>,
    pub graph: &'a EntityGraph,
}

/// What one layer of an entity network looked at.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace {
    /// Word id of every node entering the pooling step.
    pub words: Vec<u32>,
    /// Importance score per node; empty when pooling is ablated.
    pub beta: Vec<f64>,
    /// Positions (into `words`) kept by pooling.
    pub selected: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetTrace {
    pub layers: Vec<LayerTrace>,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub prediction: Var,
    pub user_repr: Var,
    pub item_repr: Var,
    pub user_trace: NetTrace,
    pub item_trace: NetTrace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rgnn {
    config: ModelConfig,
}

impl Rgnn {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        user: EntityInput,
        item: EntityInput,
    ) -> Result<ForwardOutput, ModelError> {
        let (p, user_trace) = self.entity_net(tape, Side::User, user)?;
        let (q, item_trace) = self.entity_net(tape, Side::Item, item)?;
        let prediction = if self.config.ablations.dot_product_head {
            tape.row_dot(p, q)?
        } else {
            let z = tape.concat_cols(&[p, q])?;
            let weights = FmWeights {
                b0: tape.param("fm.b0")?,
                w: tape.param("fm.w")?,
                v: tape.param("fm.v")?,
            };
            let bu = self.bias(tape, Side::User, user.row)?;
            let bi = self.bias(tape, Side::Item, item.row)?;
            super::fm_predict(tape, z, &weights, bu, bi)?
        };
        Ok(ForwardOutput {
            prediction,
            user_repr: p,
            item_repr: q,
            user_trace,
            item_trace,
        })
    }

    /// Forward pass without gradients.
    pub fn predict(&self, store: &ParameterStore, user: EntityInput, item: EntityInput) -> Result<f64, ModelError> {
        let mut tape = Tape::new(store);
        let out = self.forward(&mut tape, user, item)?;
        Ok(tape.scalar(out.prediction)?)
    }

    fn lookup(&self, tape: &mut Tape, table: &str, side: Side, row: usize) -> Result<Var, ModelError> {
        let bound = tape.store().require(table)?.rows();
        if row >= bound {
            return Err(ModelError::UnknownEntity { side, index: row, bound });
        }
        Ok(tape.param_rows(table, vec![row])?)
    }

    fn bias(&self, tape: &mut Tape, side: Side, row: Option<usize>) -> Result<Option<Var>, ModelError> {
        row.map(|r| self.lookup(tape, side.bias_table(), side, r)).transpose()
    }

    fn entity_net(&self, tape: &mut Tape, side: Side, input: EntityInput) -> Result<(Var, NetTrace), ModelError> {
        let c = &self.config;
        let ab = &c.ablations;
        let e = match input.row {
            Some(r) => self.lookup(tape, side.embedding_table(), side, r)?,
            None => zero_row(tape, c.d1)?,
        };
        let p = |tape: &mut Tape, l: Option<usize>, f: &str| tape.param(&param_name(side, l, f));

        let w7 = p(tape, None, "w7")?;
        let b7 = p(tape, None, "b7")?;
        let m = tape.matmul(e, w7)?;
        let m = tape.add_row(m, b7)?;
        let m = tape.relu(m)?;

        let words: Vec<usize> = input.graph.words.iter().map(|&w| w as usize).collect();
        let mut x = tape.param_rows("word_emb", words)?;
        let mut trace = NetTrace::default();

        if ab.no_graph {
            let (w, b) = (p(tape, None, "rg_w")?, p(tape, None, "rg_b")?);
            let r = layers::subgraph_readout(tape, x, w, b)?;
            return Ok((layers::fuse_representation(tape, m, &[r], 1)?, trace));
        }

        let mut graph = input.graph.layer.clone();
        let mut node_words = input.graph.words.clone();
        let mut readouts = Vec::with_capacity(c.layers);
        for l in 1..=c.layers {
            let weights = TgatWeights {
                w1: p(tape, Some(l), "w1")?,
                w2: p(tape, Some(l), "w2")?,
                w3: (!ab.no_edge_types).then(|| p(tape, Some(l), "w3")).transpose()?,
                edge_emb: (!ab.no_edge_types).then(|| p(tape, Some(l), "edge_emb")).transpose()?,
                w4: p(tape, Some(l), "w4")?,
            };
            let hidden = layers::tgat_layer(tape, &graph, x, &weights, c.leaky_slope)?.hidden;

            if ab.no_pooling {
                trace.layers.push(LayerTrace {
                    selected: (0..node_words.len()).collect(),
                    words: node_words.clone(),
                    beta: Vec::new(),
                });
                x = hidden;
            } else {
                let theta = if ab.shared_theta {
                    p(tape, Some(l), "theta")?
                } else {
                    let (w5, b5) = (p(tape, Some(l), "w5")?, p(tape, Some(l), "b5")?);
                    layers::measurement_vector(tape, e, w5, b5)?
                };
                let score_w = (!ab.no_diversity_term)
                    .then(|| p(tape, Some(l), "score_w"))
                    .transpose()?;
                let beta = layers::importance_scores(tape, &graph, hidden, theta, score_w)?;
                let pooled = layers::pgp_layer(tape, &graph, hidden, beta, c.alpha)?;
                let kept: Vec<u32> = pooled.selected.iter().map(|&i| node_words[i]).collect();
                trace.layers.push(LayerTrace {
                    words: std::mem::replace(&mut node_words, kept),
                    beta: tape.value(beta).data().to_vec(),
                    selected: pooled.selected,
                });
                graph = pooled.graph;
                x = pooled.features;
            }

            let (w6, b6) = (p(tape, Some(l), "w6")?, p(tape, Some(l), "b6")?);
            readouts.push(layers::subgraph_readout(tape, x, w6, b6)?);
        }
        Ok((layers::fuse_representation(tape, m, &readouts, c.layers)?, trace))
    }
}
