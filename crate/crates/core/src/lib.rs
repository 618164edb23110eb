//! Review-graph neural network for rating prediction.
//!
//! Each user and item is represented by a typed graph-of-words built from
//! its training reviews. A stack of type-aware attention layers and
//! personalized top-k pooling layers produces hierarchical graph readouts,
//! which are fused with an id embedding and scored by a factorization
//! machine head.
//!
//! Module map:
//!
//! - [`ingest`]: record parsing, tokenization, vocabulary, splits, documents.
//! - [`wordgraph`]: typed review graphs and their cache file.
//! - [`numcore`]: reverse-mode tape, Adam, finite-difference checker.
//! - [`model`]: attention, pooling, readout, fusion, FM head.
//! - [`trainer`]: mini-batch training with early stopping.

pub mod ingest;
pub mod model;
pub mod numcore;
pub mod par;
pub mod pipeline;
pub mod seeds;
pub mod synthetic;
pub mod trainer;
pub mod wordgraph;
