//! Mini-batch training with L2 regularization, early stopping and
//! evaluation.

mod data;
mod eval;
mod objective;
mod train;

pub use data::{Example, TrainingData};
pub use eval::{evaluate, EvalReport, RESIDUAL_BINS};
pub use objective::{batch_gradients, check_gradients, loss, objective_on_tape, regularizer, BatchResult};
pub use train::{EpochRecord, TrainHistory, TrainOutcome, Trainer};

use thiserror::Error;

use crate::model::ModelError;
use crate::numcore::NumError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("pair {pair} failed: {source}")]
    Pair {
        pair: String,
        #[source]
        source: ModelError,
    },
    #[error("non-finite loss at pair {pair}")]
    NonFiniteLoss { pair: String },
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("training set is empty")]
    EmptyTraining,
    #[error("invalid train config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// L2 weight on the squared norm of every parameter.
    pub lambda: f64,
    /// Epochs without strict validation improvement before stopping.
    pub patience: usize,
    /// Seed of the per-epoch shuffle stream.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 50,
            batch_size: 128,
            learning_rate: 0.001,
            lambda: 0.001,
            patience: 5,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.batch_size == 0 {
            return fail("batch size must be at least 1");
        }
        if self.patience == 0 {
            return fail("patience must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be finite and non-negative");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail("lambda must be finite and non-negative");
        }
        Ok(())
    }
}
