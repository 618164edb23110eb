mod common;

use rgnn::model::{declare_parameters, ModelConfig, Rgnn};
use rgnn::par::ExecMode;
use rgnn::pipeline::train_and_evaluate;
use rgnn::trainer::{batch_gradients, evaluate, Example, TrainConfig, Trainer};

fn small_model() -> ModelConfig {
    ModelConfig {
        d0: 8,
        d1: 8,
        d2: 4,
        ..ModelConfig::default()
    }
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        max_epochs: epochs,
        batch_size: 32,
        learning_rate: 0.005,
        lambda: 0.001,
        patience: epochs,
        shuffle_seed: 11,
    }
}

#[test]
fn zero_learning_rate_stops_after_patience_plus_one() {
    let cfg = small_model();
    let (_, data) = common::planted(&cfg);
    let model = Rgnn::new(cfg.clone()).unwrap();
    let store = declare_parameters(&cfg, data.sizes(), 3).unwrap();
    let tc = TrainConfig {
        learning_rate: 0.0,
        patience: 1,
        max_epochs: 10,
        ..quick(10)
    };
    let outcome = Trainer::new(&model, &data, store.clone(), tc, ExecMode::Parallel)
        .unwrap()
        .train()
        .unwrap();
    assert_eq!(outcome.history.epochs.len(), 2);
    assert_eq!(outcome.history.best_epoch, Some(1));
    assert_eq!(outcome.best, store);
}

#[test]
fn repeated_runs_match_exactly() {
    let cfg = small_model();
    let (_, data) = common::planted(&cfg);
    let run = || train_and_evaluate(&data, &cfg, &quick(4), 5, ExecMode::Parallel, |_| Ok(())).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.outcome.best, b.outcome.best);
    assert_eq!(a.outcome.history, b.outcome.history);
    assert_eq!(a.test.mse.to_bits(), b.test.mse.to_bits());
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let cfg = small_model();
    let (_, data) = common::planted(&cfg);
    let run = |mode| train_and_evaluate(&data, &cfg, &quick(3), 5, mode, |_| Ok(())).unwrap();
    let (s, p) = (run(ExecMode::Sequential), run(ExecMode::Parallel));
    assert_eq!(s.outcome.best, p.outcome.best);
    assert_eq!(s.outcome.history, p.outcome.history);
}

#[test]
fn small_step_reduces_batch_loss() {
    let cfg = small_model();
    let (_, data) = common::planted(&cfg);
    let model = Rgnn::new(cfg.clone()).unwrap();
    let store = declare_parameters(&cfg, data.sizes(), 9).unwrap();
    let batch: Vec<&Example> = data.train.iter().take(32).collect();
    let scale = batch.len() as f64 / data.train.len() as f64;
    let before = batch_gradients(&model, &store, &data, &batch, 0.001, scale, ExecMode::Parallel).unwrap();
    let mut stepped = store.clone();
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for (name, g) in names.iter().zip(before.grads.iter()) {
        let t = stepped.get_mut(name).unwrap();
        for (x, d) in t.data_mut().iter_mut().zip(g.data()) {
            *x -= 1e-4 * d;
        }
    }
    let after = batch_gradients(&model, &stepped, &data, &batch, 0.001, scale, ExecMode::Parallel).unwrap();
    assert!(after.loss < before.loss, "{} -> {}", before.loss, after.loss);
}

#[test]
fn each_epoch_visits_every_example_once() {
    let cfg = small_model();
    let (_, data) = common::planted(&cfg);
    let model = Rgnn::new(cfg.clone()).unwrap();
    let store = declare_parameters(&cfg, data.sizes(), 1).unwrap();
    let mut trainer = Trainer::new(&model, &data, store, quick(3), ExecMode::Parallel).unwrap();
    let mut orders = Vec::new();
    for _ in 0..3 {
        trainer.run_epoch().unwrap();
        let mut order = trainer.last_order().to_vec();
        orders.push(order.clone());
        order.sort_unstable();
        assert_eq!(order, (0..data.train.len()).collect::<Vec<_>>());
    }
    assert_ne!(orders[0], orders[1]);
}

#[test]
fn returned_parameters_achieve_best_validation_mse() {
    let cfg = small_model();
    let (_, data) = common::planted(&cfg);
    let tc = TrainConfig {
        learning_rate: 0.02,
        ..quick(8)
    };
    let r = train_and_evaluate(&data, &cfg, &tc, 2, ExecMode::Parallel, |_| Ok(())).unwrap();
    let best = r
        .outcome
        .history
        .epochs
        .iter()
        .map(|e| e.val_mse)
        .fold(f64::INFINITY, f64::min);
    let recomputed = evaluate(&r.model, &r.outcome.best, &data, &data.val, ExecMode::Parallel).unwrap().mse;
    assert_eq!(recomputed.to_bits(), best.to_bits());
    assert_eq!(r.outcome.history.best_val_mse, Some(best));
}
