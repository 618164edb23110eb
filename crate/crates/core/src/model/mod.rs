//! The rating model: per-entity typed-graph attention and pooling networks
//! joined by a factorization-machine head.

mod config;
mod fm;
mod forward;
mod graph;
mod layers;
mod params;

pub use config::{pooled_size, Ablations, ModelConfig, Variant};
pub use fm::{fm_predict, pairwise_interaction, FmWeights};
pub use forward::{EntityInput, ForwardOutput, LayerTrace, NetTrace, Rgnn, Side};
pub use graph::{EntityGraph, LayerGraph};
pub use layers::{
    attention_logit, fuse_representation, importance_scores, measurement_vector, pgp_layer, subgraph_readout,
    tgat_layer, top_k_select, PooledLayer, TgatOutput, TgatWeights,
};
pub use params::{declare_parameters, param_name, ModelSizes};

use thiserror::Error;

use crate::numcore::NumError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("expected {expected} readouts, got {got}")]
    ReadoutCount { expected: usize, got: usize },
    #[error("{side} index {index} outside table of {bound} rows")]
    UnknownEntity { side: Side, index: usize, bound: usize },
}
