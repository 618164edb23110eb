use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numcore::{Init, ParameterStore};

use super::{ModelConfig, ModelError, Side};

/// Table sizes the parameter store is declared for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelSizes {
    pub words: usize,
    pub users: usize,
    pub items: usize,
}

const EMBEDDING_BOUND: f64 = 0.1;

/// Name of a per-network parameter, e.g. `user.l2.w4` or `item.w7`.
pub fn param_name(side: Side, layer: Option<usize>, field: &str) -> String {
    match layer {
        Some(l) => format!("{side}.l{l}.{field}"),
        None => format!("{side}.{field}"),
    }
}

/// Declares every parameter the configured variant reads, and nothing else.
///
/// Embedding tables and factors start uniform in `±0.1`, weight matrices
/// uniform in `±1/√fan_in`, biases at zero.
pub fn declare_parameters(config: &ModelConfig, sizes: ModelSizes, seed: u64) -> Result<ParameterStore, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParameterStore::new();
    let emb = Init::Uniform(EMBEDDING_BOUND);
    let ab = &config.ablations;
    let (d0, d1, d2) = (config.d0, config.d1, config.d2);

    s.declare("word_emb", sizes.words, d0, emb, &mut rng)?;
    s.declare("user_emb", sizes.users, d1, emb, &mut rng)?;
    s.declare("item_emb", sizes.items, d1, emb, &mut rng)?;

    for side in Side::BOTH {
        s.declare(param_name(side, None, "w7"), d1, d1, Init::FanIn, &mut rng)?;
        s.declare(param_name(side, None, "b7"), 1, d1, Init::Zeros, &mut rng)?;
        if ab.no_graph {
            s.declare(param_name(side, None, "rg_w"), d0, d1, Init::FanIn, &mut rng)?;
            s.declare(param_name(side, None, "rg_b"), 1, d1, Init::Zeros, &mut rng)?;
            continue;
        }
        for l in 1..=config.layers {
            let din = config.layer_input_dim(l);
            let n = |f: &str| param_name(side, Some(l), f);
            s.declare(n("w1"), din, d2, Init::FanIn, &mut rng)?;
            s.declare(n("w2"), din, d2, Init::FanIn, &mut rng)?;
            if !ab.no_edge_types {
                s.declare(n("w3"), din, d2, Init::FanIn, &mut rng)?;
                s.declare(n("edge_emb"), 3, din, emb, &mut rng)?;
            }
            s.declare(n("w4"), din, d2, Init::FanIn, &mut rng)?;
            if !ab.no_pooling {
                if ab.shared_theta {
                    s.declare(n("theta"), 1, d2, emb, &mut rng)?;
                } else {
                    s.declare(n("w5"), d1, d2, Init::FanIn, &mut rng)?;
                    s.declare(n("b5"), 1, d2, Init::Zeros, &mut rng)?;
                }
                if !ab.no_diversity_term {
                    s.declare(n("score_w"), 1, d2, Init::FanIn, &mut rng)?;
                }
            }
            s.declare(n("w6"), d2, d1, Init::FanIn, &mut rng)?;
            s.declare(n("b6"), 1, d1, Init::Zeros, &mut rng)?;
        }
    }

    if !ab.dot_product_head {
        let dp = config.fm_dim();
        s.declare("fm.b0", 1, 1, Init::Zeros, &mut rng)?;
        s.declare("fm.user_bias", sizes.users, 1, Init::Zeros, &mut rng)?;
        s.declare("fm.item_bias", sizes.items, 1, Init::Zeros, &mut rng)?;
        s.declare("fm.w", 1, dp, Init::FanIn, &mut rng)?;
        s.declare("fm.v", dp, config.fm_k(), emb, &mut rng)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::super::Variant;
    use super::*;

    const SIZES: ModelSizes = ModelSizes {
        words: 30,
        users: 4,
        items: 5,
    };

    #[test]
    fn full_model_layout() {
        let c = ModelConfig::default();
        let s = declare_parameters(&c, SIZES, 1).unwrap();
        assert_eq!(s.require("word_emb").unwrap().shape(), (30, 16));
        assert_eq!(s.require("user.l1.w1").unwrap().shape(), (16, 8));
        assert_eq!(s.require("item.l2.w1").unwrap().shape(), (8, 8));
        assert_eq!(s.require("user.l2.edge_emb").unwrap().shape(), (3, 8));
        assert_eq!(s.require("fm.v").unwrap().shape(), (96, 8));
        assert_eq!(s.require("fm.user_bias").unwrap().shape(), (4, 1));
        assert!(s.require("user.l1.b5").unwrap().data().iter().all(|&x| x == 0.0));
        assert_eq!(s, declare_parameters(&c, SIZES, 1).unwrap());
        assert_ne!(s, declare_parameters(&c, SIZES, 2).unwrap());
    }

    #[test]
    fn ablations_declare_only_what_they_use() {
        let base = ModelConfig::default();
        let has = |v: Variant, name: &str| {
            declare_parameters(&base.with_variant(v), SIZES, 0)
                .unwrap()
                .contains(name)
        };
        assert!(!has(Variant::NoEdgeTypes, "user.l1.w3"));
        assert!(!has(Variant::SharedTheta, "user.l1.w5"));
        assert!(has(Variant::SharedTheta, "user.l1.theta"));
        assert!(!has(Variant::NoDiversity, "item.l2.score_w"));
        assert!(!has(Variant::NoPooling, "item.l2.b5"));
        assert!(has(Variant::NoPooling, "item.l2.w6"));
        assert!(!has(Variant::NoGraph, "user.l1.w1"));
        assert!(has(Variant::NoGraph, "user.rg_w"));
        assert!(!has(Variant::DotProduct, "fm.v"));
        assert!(has(Variant::NoForward, "user.l1.w3"));
    }

    #[test]
    fn invalid_config_rejected() {
        let c = ModelConfig {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(matches!(declare_parameters(&c, SIZES, 0), Err(ModelError::Config(_))));
    }
}
