//! Dense reverse-mode differentiation, the Adam optimizer, a central
//! finite-difference checker and the checkpoint container.
//!
//! Every model computation is expressed with the primitives on [`Tape`];
//! a pass records values against an immutable [`ParameterStore`] and
//! [`Tape::backward`] returns sparse per-parameter gradients.

mod adam;
mod checkpoint;
mod gradcheck;
mod store;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError, CHECKPOINT_MAGIC};
pub use gradcheck::{fd_check, Evaluation, FdOptions, FdReport};
pub use store::{Init, ParameterStore};
pub use tape::{sigmoid, Gradients, ParamGrad, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("tensor of shape {shape:?} cannot hold {len} values")]
    BadLength { shape: (usize, usize), len: usize },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("non-finite gradient for parameter `{param}`")]
    NonFiniteGradient { param: String },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{0}` declared twice")]
    DuplicateParam(String),
    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("backward root must be 1x1, got {0:?}")]
    NonScalarRoot((usize, usize)),
    #[error("gradient layout does not match the parameter store")]
    LayoutMismatch,
}

/// Dense gradients aligned with a [`ParameterStore`]'s declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseGradients {
    grads: Vec<Tensor>,
}

impl DenseGradients {
    pub fn zeros_like(store: &ParameterStore) -> Self {
        Self {
            grads: store
                .iter()
                .map(|(_, t)| Tensor::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn from_sparse(store: &ParameterStore, sparse: &Gradients) -> Self {
        let mut out = Self::zeros_like(store);
        out.accumulate(sparse);
        out
    }

    pub fn accumulate(&mut self, sparse: &Gradients) {
        for (idx, g) in sparse.iter() {
            tape::add_param_grad(&mut self.grads[idx], g);
        }
    }

    /// Adds `k·θ` for every parameter (gradient of `k/2·‖Θ‖²`).
    pub fn add_scaled_params(&mut self, store: &ParameterStore, k: f64) {
        for (g, (_, p)) in self.grads.iter_mut().zip(store.iter()) {
            for (gv, pv) in g.data_mut().iter_mut().zip(p.data()) {
                *gv += k * pv;
            }
        }
    }

    pub fn get(&self, store: &ParameterStore, name: &str) -> Option<&Tensor> {
        store.index_of(name).map(|i| &self.grads[i])
    }

    pub fn by_index(&self, idx: usize) -> &Tensor {
        &self.grads[idx]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.grads.iter()
    }
}
