use crate::model::{ModelError, Rgnn};
use crate::numcore::{
    fd_check, DenseGradients, Evaluation, FdOptions, FdReport, Gradients, ParameterStore, Tape, Tensor, Var,
};
use crate::par::{self, ExecMode};

use super::{Example, TrainError, TrainingData};

/// `λ·scale·‖Θ‖²` over every parameter in store order.
pub fn regularizer(store: &ParameterStore, lambda: f64, scale: f64) -> f64 {
    lambda * scale * store.squared_norm()
}

/// `Σ (y − ŷ)² + λ·scale·‖Θ‖²` from precomputed squared residuals.
pub fn loss(squared_residuals: &[f64], store: &ParameterStore, lambda: f64, scale: f64) -> f64 {
    squared_residuals.iter().sum::<f64>() + regularizer(store, lambda, scale)
}

#[derive(Clone, Debug)]
pub struct BatchResult {
    /// Sum of squared residuals over the batch.
    pub sse: f64,
    /// `sse` plus the scaled regularizer.
    pub loss: f64,
    pub grads: DenseGradients,
}

fn pair_error(ex: &Example, source: ModelError) -> TrainError {
    TrainError::Pair {
        pair: ex.key.clone(),
        source,
    }
}

fn pair_gradient(
    model: &Rgnn,
    store: &ParameterStore,
    data: &TrainingData,
    ex: &Example,
) -> Result<(f64, Gradients), TrainError> {
    let mut tape = Tape::new(store);
    let (u, i) = data.inputs(ex);
    let run = |tape: &mut Tape| -> Result<Var, ModelError> {
        let out = model.forward(tape, u, i)?;
        let y = tape.constant(Tensor::scalar(ex.rating))?;
        let r = tape.sub(out.prediction, y)?;
        Ok(tape.mul(r, r)?)
    };
    let sq = run(&mut tape).map_err(|e| pair_error(ex, e))?;
    let value = tape.scalar(sq)?;
    if !value.is_finite() {
        return Err(TrainError::NonFiniteLoss { pair: ex.key.clone() });
    }
    let grads = tape.backward(sq).map_err(|e| pair_error(ex, e.into()))?;
    Ok((value, grads))
}

/// Loss and gradient of one mini-batch.
///
/// Pairs are differentiated independently (concurrently under
/// [`ExecMode::Parallel`]) against the same store and their gradients are
/// summed in batch order, so both modes give bit-identical results. The
/// regularizer gradient `2λ·scale·Θ` is added analytically.
pub fn batch_gradients(
    model: &Rgnn,
    store: &ParameterStore,
    data: &TrainingData,
    batch: &[&Example],
    lambda: f64,
    scale: f64,
    mode: ExecMode,
) -> Result<BatchResult, TrainError> {
    let per_pair = par::try_map(mode, batch, |ex| pair_gradient(model, store, data, ex))?;
    let mut grads = DenseGradients::zeros_like(store);
    let mut sse = 0.0;
    for (sq, g) in &per_pair {
        sse += sq;
        grads.accumulate(g);
    }
    if lambda != 0.0 {
        grads.add_scaled_params(store, 2.0 * lambda * scale);
    }
    let loss = sse + regularizer(store, lambda, scale);
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            pair: "regularizer".to_string(),
        });
    }
    Ok(BatchResult { sse, loss, grads })
}

/// The same objective as [`batch_gradients`] recorded on a single tape,
/// regularizer included. Used for gradient checks.
pub fn objective_on_tape(
    model: &Rgnn,
    tape: &mut Tape,
    data: &TrainingData,
    batch: &[&Example],
    lambda: f64,
    scale: f64,
) -> Result<Var, TrainError> {
    let mut total = tape.constant(Tensor::scalar(0.0))?;
    for ex in batch {
        let (u, i) = data.inputs(ex);
        let out = model.forward(tape, u, i).map_err(|e| pair_error(ex, e))?;
        let y = tape.constant(Tensor::scalar(ex.rating))?;
        let r = tape.sub(out.prediction, y)?;
        let sq = tape.mul(r, r)?;
        total = tape.add(total, sq)?;
    }
    if lambda != 0.0 {
        let names: Vec<String> = tape.store().names().map(str::to_string).collect();
        for name in names {
            let p = tape.param(&name)?;
            let sq = tape.mul(p, p)?;
            let s = tape.sum(sq)?;
            let s = tape.scale(s, lambda * scale)?;
            total = tape.add(total, s)?;
        }
    }
    Ok(total)
}

/// Compares [`batch_gradients`] against central differences of
/// [`objective_on_tape`], skipping coordinates whose perturbation flips a
/// relu sign, a max, or a pooling selection.
pub fn check_gradients(
    model: &Rgnn,
    store: &ParameterStore,
    data: &TrainingData,
    batch: &[&Example],
    lambda: f64,
    scale: f64,
    opts: &FdOptions,
) -> Result<FdReport, TrainError> {
    let analytic = batch_gradients(model, store, data, batch, lambda, scale, ExecMode::Sequential)?.grads;
    let f = |s: &ParameterStore| -> Result<Evaluation, TrainError> {
        let mut tape = Tape::new(s);
        tape.track_kinks();
        let y = objective_on_tape(model, &mut tape, data, batch, lambda, scale)?;
        Ok(Evaluation {
            value: tape.scalar(y)?,
            kink_signature: tape.kink_signature(),
        })
    };
    fd_check(f, store, &analytic, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        let empty = ParameterStore::new();
        assert_eq!(loss(&[0.0, 0.0], &empty, 0.0, 1.0), 0.0);
        assert_eq!(loss(&[4.0], &empty, 0.0, 1.0), 4.0);
    }

    #[test]
    fn per_batch_regularizer_sums_to_epoch_objective() {
        let mut store = ParameterStore::new();
        store.insert("theta", Tensor::scalar(3.0)).unwrap();
        // |D| = 10 split into batches of 4, 4 and 2.
        let total: f64 = [4.0, 4.0, 2.0]
            .iter()
            .map(|b| loss(&[0.0], &store, 0.1, b / 10.0))
            .sum();
        assert!((total - 0.9).abs() < 1e-15);
    }

    #[test]
    fn regularizer_gradient_matches_tape_exactly() {
        let mut store = ParameterStore::new();
        store.insert("a", Tensor::from_rows(&[&[0.3, -1.7], &[2.5, 0.125]])).unwrap();
        store.insert("b", Tensor::row_vector(&[-0.9])).unwrap();
        let (lambda, scale) = (0.37, 0.25);
        let mut analytic = DenseGradients::zeros_like(&store);
        analytic.add_scaled_params(&store, 2.0 * lambda * scale);

        let mut tape = Tape::new(&store);
        let mut total = tape.constant(Tensor::scalar(0.0)).unwrap();
        for name in ["a", "b"] {
            let p = tape.param(name).unwrap();
            let sq = tape.mul(p, p).unwrap();
            let s = tape.sum(sq).unwrap();
            let s = tape.scale(s, lambda * scale).unwrap();
            total = tape.add(total, s).unwrap();
        }
        let g = DenseGradients::from_sparse(&store, &tape.backward(total).unwrap());
        assert_eq!(g, analytic);
        let direct = regularizer(&store, lambda, scale);
        assert!((tape.scalar(total).unwrap() - direct).abs() < 1e-14);
    }
}
