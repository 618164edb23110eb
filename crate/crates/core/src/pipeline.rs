//! Glue from a preprocessed corpus to a trained and evaluated model.

use thiserror::Error;

use crate::ingest::{Corpus, IngestError};
use crate::model::{declare_parameters, ModelConfig, ModelError, Rgnn};
use crate::numcore::CheckpointError;
use crate::par::ExecMode;
use crate::seeds::{SeedFan, GRAPH_COIN, INIT, SHUFFLE};
use crate::trainer::{evaluate, EvalReport, TrainConfig, TrainError, TrainOutcome, Trainer, TrainingData};
use crate::wordgraph::{GraphCache, GraphCacheKey, GraphError, DEFAULT_MAX_NODES};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Graph cache key for window `omega` under root seed `seed`.
pub fn graph_key(omega: u32, seed: u64) -> GraphCacheKey {
    GraphCacheKey {
        omega,
        coin_seed: SeedFan::new(seed).sub(GRAPH_COIN),
        max_nodes: DEFAULT_MAX_NODES,
    }
}

pub fn build_graphs(corpus: &Corpus, key: GraphCacheKey, mode: ExecMode) -> Result<GraphCache, GraphError> {
    GraphCache::build(&corpus.documents, key.builder(), mode)
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub model: Rgnn,
    pub outcome: TrainOutcome,
    pub val: EvalReport,
    pub test: EvalReport,
}

/// Declares parameters from the `init` sub-seed, trains with the `shuffle`
/// sub-seed and evaluates the best checkpoint on validation and test.
/// `on_epoch` runs after every epoch.
pub fn train_and_evaluate<F>(
    data: &TrainingData,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
    mode: ExecMode,
    mut on_epoch: F,
) -> Result<RunResult, PipelineError>
where
    F: FnMut(&Trainer) -> Result<(), PipelineError>,
{
    let fan = SeedFan::new(seed);
    let model = Rgnn::new(model_cfg.clone())?;
    let store = declare_parameters(model_cfg, data.sizes(), fan.sub(INIT))?;
    let cfg = TrainConfig {
        shuffle_seed: fan.sub(SHUFFLE),
        ..train_cfg.clone()
    };
    let mut trainer = Trainer::new(&model, data, store, cfg, mode)?;
    while !trainer.finished() {
        trainer.run_epoch()?;
        on_epoch(&trainer)?;
    }
    let outcome = trainer.into_outcome();
    let val = evaluate(&model, &outcome.best, data, &data.val, mode)?;
    let test = evaluate(&model, &outcome.best, data, &data.test, mode)?;
    Ok(RunResult {
        model,
        outcome,
        val,
        test,
    })
}
