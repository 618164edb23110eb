//! Generated datasets with known structure, for overfit, ablation and
//! gradient checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{InteractionRecord, Review};
use crate::model::{declare_parameters, EntityGraph, ModelConfig};
use crate::numcore::ParameterStore;
use crate::trainer::{Example, TrainingData};
use crate::wordgraph::build_review_graph;

const FILLER: [&str; 20] = [
    "guitar", "string", "cable", "sound", "tone", "pedal", "strap", "tuner", "bridge", "case", "amp", "neck",
    "fret", "pick", "volume", "knob", "jack", "wood", "finish", "price",
];

/// Words that carry the planted item-quality signal.
pub const POSITIVE_WORDS: [&str; 2] = ["superb", "wonderful"];
pub const NEGATIVE_WORDS: [&str; 2] = ["dreadful", "awful"];

#[derive(Clone, Debug)]
pub struct PlantedCorpus {
    pub records: Vec<InteractionRecord>,
    /// `+1` or `−1` per item index.
    pub item_signal: Vec<f64>,
}

impl PlantedCorpus {
    pub fn is_signal_word(word: &str) -> bool {
        POSITIVE_WORDS.contains(&word) || NEGATIVE_WORDS.contains(&word)
    }
}

/// Every user rates every item. The rating is
/// `clamp(3 + a_u·b_i + s_i, 1, 5)` with 2-dimensional latent factors and
/// an item sign `s_i` that is also written into every review of the item
/// as a positive or negative keyword among filler words.
pub fn planted_corpus(users: usize, items: usize, seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor = |rng: &mut ChaCha8Rng| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let a: Vec<[f64; 2]> = (0..users).map(|_| factor(&mut rng)).collect();
    let b: Vec<[f64; 2]> = (0..items).map(|_| factor(&mut rng)).collect();
    let item_signal: Vec<f64> = (0..items).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();

    let mut records = Vec::with_capacity(users * items);
    let mut ts = 0i64;
    for (u, au) in a.iter().enumerate() {
        for (i, bi) in b.iter().enumerate() {
            let s = item_signal[i];
            let rating = (3.0 + au[0] * bi[0] + au[1] * bi[1] + s).clamp(1.0, 5.0);
            let mut words: Vec<&str> = (0..6).map(|_| *FILLER.choose(&mut rng).expect("non-empty")).collect();
            let pool = if s > 0.0 { &POSITIVE_WORDS } else { &NEGATIVE_WORDS };
            let at = rng.gen_range(0..=words.len());
            words.insert(at, pool.choose(&mut rng).expect("non-empty"));
            ts += 1;
            records.push(InteractionRecord {
                user_id: format!("u{u:02}"),
                item_id: format!("i{i:02}"),
                rating,
                review_text: words.join(" "),
                timestamp: Some(ts),
            });
        }
    }
    PlantedCorpus { records, item_signal }
}

/// A tiny random instance for gradient checks: two users, two items,
/// graphs of at most six nodes, every dimension `dim`.
#[derive(Clone, Debug)]
pub struct ToyInstance {
    pub config: ModelConfig,
    pub data: TrainingData,
    pub store: ParameterStore,
}

pub fn toy_instance(seed: u64, dim: usize) -> ToyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = ModelConfig {
        d0: dim,
        d1: dim,
        d2: dim,
        ..ModelConfig::default()
    };
    let num_words = 8u32;
    let entity = |rng: &mut ChaCha8Rng| {
        let mut pool: Vec<u32> = (0..num_words).collect();
        pool.shuffle(rng);
        pool.truncate(rng.gen_range(1..=6));
        let reviews: Vec<Review> = (0..rng.gen_range(1..=2))
            .map(|_| {
                let len = rng.gen_range(1..=5);
                Review {
                    words: (0..len).map(|_| *pool.choose(rng).expect("non-empty")).collect(),
                    positions: (0..len as u32).collect(),
                }
            })
            .collect();
        let g = build_review_graph(&reviews, config.omega, seed).expect("valid toy reviews");
        EntityGraph::prepare(&g, &config.ablations)
    };
    let users = vec![entity(&mut rng), entity(&mut rng)];
    let items = vec![entity(&mut rng), entity(&mut rng)];
    let example = |u: usize, i: usize, rng: &mut ChaCha8Rng| Example {
        key: format!("u{u}|i{i}"),
        user: Some(u),
        item: Some(i),
        rating: rng.gen_range(1.0..=5.0),
    };
    let train = vec![example(0, 0, &mut rng), example(0, 1, &mut rng), example(1, 1, &mut rng)];
    let val = vec![example(1, 0, &mut rng)];
    let data = TrainingData::new(users, items, num_words as usize, train, val, Vec::new());
    let mut store = declare_parameters(&config, data.sizes(), seed).expect("valid toy config");
    // Non-zero biases so their gradients are exercised away from zero.
    for (name, t) in store.clone().iter() {
        if name.ends_with("b5") || name.ends_with("b6") || name.ends_with("b7") || name.starts_with("fm.") {
            let bumped: Vec<f64> = t.data().iter().map(|v| v + rng.gen_range(-0.3..0.3)).collect();
            store.get_mut(name).expect("present").data_mut().copy_from_slice(&bumped);
        }
    }
    ToyInstance { config, data, store }
}
