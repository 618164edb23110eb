#![allow(dead_code)]

use rgnn::ingest::{Corpus, CorpusConfig};
use rgnn::model::ModelConfig;
use rgnn::par::ExecMode;
use rgnn::pipeline::{build_graphs, graph_key};
use rgnn::seeds::{SeedFan, SPLIT};
use rgnn::synthetic::planted_corpus;
use rgnn::trainer::TrainingData;

pub const PLANTED_SEED: u64 = 7;
pub const RUN_SEED: u64 = 1;

/// Planted 20×10 corpus through the full preprocessing path.
pub fn planted(model: &ModelConfig) -> (Corpus, TrainingData) {
    let records = planted_corpus(20, 10, PLANTED_SEED).records;
    let corpus = Corpus::preprocess(records, &CorpusConfig::default(), SeedFan::new(RUN_SEED).sub(SPLIT)).unwrap();
    let graphs = build_graphs(&corpus, graph_key(model.omega, RUN_SEED), ExecMode::Parallel).unwrap();
    let data = TrainingData::from_corpus(&corpus, &graphs, &model.ablations);
    (corpus, data)
}

/// Squared-pair sum `Σ_{i<j} ⟨v_i, v_j⟩ z_i z_j` by explicit double loop.
pub fn pairwise_double_loop(z: &[f64], v: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            let dot: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum();
            total += dot * z[i] * z[j];
        }
    }
    total
}
