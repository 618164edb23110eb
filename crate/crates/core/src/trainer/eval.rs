use crate::model::Rgnn;
use crate::numcore::ParameterStore;
use crate::par::{self, ExecMode};

use super::{Example, TrainError, TrainingData};

/// Upper edges of the absolute-residual histogram; the last bin is open.
pub const RESIDUAL_BINS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub mse: f64,
    pub count: usize,
    /// Counts of `|y − ŷ|` in `[0,0.5) [0.5,1) [1,2) [2,3) [3,∞)`.
    pub histogram: [usize; 5],
    /// Pairs whose user or item was absent from training.
    pub fallback: usize,
    pub predictions: Vec<f64>,
}

/// Mean squared error over `examples`; an empty list reports MSE 0.
pub fn evaluate(
    model: &Rgnn,
    store: &ParameterStore,
    data: &TrainingData,
    examples: &[Example],
    mode: ExecMode,
) -> Result<EvalReport, TrainError> {
    let predictions = par::try_map(mode, examples, |ex| {
        let (u, i) = data.inputs(ex);
        model.predict(store, u, i).map_err(|source| TrainError::Pair {
            pair: ex.key.clone(),
            source,
        })
    })?;
    let mut histogram = [0usize; 5];
    let mut sse = 0.0;
    for (ex, y) in examples.iter().zip(&predictions) {
        let r = ex.rating - y;
        sse += r * r;
        let bin = RESIDUAL_BINS.iter().position(|&edge| r.abs() < edge).unwrap_or(4);
        histogram[bin] += 1;
    }
    let count = examples.len();
    Ok(EvalReport {
        mse: if count == 0 { 0.0 } else { sse / count as f64 },
        count,
        histogram,
        fallback: examples.iter().filter(|e| e.is_fallback()).count(),
        predictions,
    })
}
