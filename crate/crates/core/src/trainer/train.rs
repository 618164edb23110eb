use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::Rgnn;
use crate::numcore::{adam_step, AdamConfig, AdamState, ParameterStore};
use crate::par::ExecMode;

use super::{batch_gradients, evaluate, Example, TrainConfig, TrainError, TrainingData};

#[derive(Clone, Debug)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Summed batch objective divided by the number of training pairs.
    pub train_loss: f64,
    /// Mean squared residual seen during the epoch (pre-update parameters
    /// of each batch).
    pub train_mse: f64,
    pub val_mse: f64,
    pub improved: bool,
    pub wall_seconds: f64,
}

/// Timing is excluded from equality so that reruns compare equal.
impl PartialEq for EpochRecord {
    fn eq(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.train_loss.to_bits() == other.train_loss.to_bits()
            && self.train_mse.to_bits() == other.train_mse.to_bits()
            && self.val_mse.to_bits() == other.val_mse.to_bits()
            && self.improved == other.improved
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch of the lowest validation MSE.
    pub best_epoch: Option<usize>,
    pub best_val_mse: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters after the best-validation epoch.
    pub best: ParameterStore,
    pub best_optimizer: AdamState,
    pub history: TrainHistory,
}

/// Epoch-at-a-time trainer. [`Trainer::train`] runs to completion;
/// callers that log or checkpoint per epoch drive [`Trainer::run_epoch`]
/// themselves.
pub struct Trainer<'a> {
    model: &'a Rgnn,
    data: &'a TrainingData,
    config: TrainConfig,
    mode: ExecMode,
    store: ParameterStore,
    adam: AdamState,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    history: TrainHistory,
    best: Option<(ParameterStore, AdamState)>,
    since_best: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        model: &'a Rgnn,
        data: &'a TrainingData,
        store: ParameterStore,
        config: TrainConfig,
        mode: ExecMode,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        if data.train.is_empty() {
            return Err(TrainError::EmptyTraining);
        }
        if data.val.is_empty() {
            return Err(TrainError::EmptyValidation);
        }
        let adam = AdamState::new(
            &store,
            AdamConfig {
                learning_rate: config.learning_rate,
                ..AdamConfig::default()
            },
        );
        Ok(Self {
            model,
            data,
            rng: ChaCha8Rng::seed_from_u64(config.shuffle_seed),
            config,
            mode,
            store,
            adam,
            order: (0..data.train.len()).collect(),
            history: TrainHistory::default(),
            best: None,
            since_best: 0,
        })
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.adam
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    /// Training order used by the most recent epoch.
    pub fn last_order(&self) -> &[usize] {
        &self.order
    }

    pub fn finished(&self) -> bool {
        self.history.epochs.len() >= self.config.max_epochs || self.since_best >= self.config.patience
    }

    pub fn run_epoch(&mut self) -> Result<&EpochRecord, TrainError> {
        let start = Instant::now();
        let n = self.data.train.len();
        self.order.shuffle(&mut self.rng);
        let mut loss = 0.0;
        let mut sse = 0.0;
        for chunk in self.order.chunks(self.config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &self.data.train[i]).collect();
            let scale = batch.len() as f64 / n as f64;
            let r = batch_gradients(
                self.model,
                &self.store,
                self.data,
                &batch,
                self.config.lambda,
                scale,
                self.mode,
            )?;
            adam_step(&mut self.store, &r.grads, &mut self.adam)?;
            loss += r.loss;
            sse += r.sse;
        }
        let val = evaluate(self.model, &self.store, self.data, &self.data.val, self.mode)?.mse;
        let improved = self.history.best_val_mse.is_none_or(|b| val < b);
        let epoch = self.history.epochs.len() + 1;
        if improved {
            self.history.best_epoch = Some(epoch);
            self.history.best_val_mse = Some(val);
            self.best = Some((self.store.clone(), self.adam.clone()));
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        log::info!("epoch {epoch}: train loss {:.6}, val mse {val:.6}", loss / n as f64);
        self.history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss / n as f64,
            train_mse: sse / n as f64,
            val_mse: val,
            improved,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        Ok(self.history.epochs.last().expect("just pushed"))
    }

    /// Best checkpoint so far; the current state before any epoch ran.
    pub fn into_outcome(self) -> TrainOutcome {
        let (best, best_optimizer) = self.best.unwrap_or((self.store, self.adam));
        TrainOutcome {
            best,
            best_optimizer,
            history: self.history,
        }
    }

    pub fn train(mut self) -> Result<TrainOutcome, TrainError> {
        while !self.finished() {
            self.run_epoch()?;
        }
        Ok(self.into_outcome())
    }
}
