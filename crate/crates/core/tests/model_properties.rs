#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;

use rgnn::ingest::Review;
use rgnn::model::{
    declare_parameters, importance_scores, pgp_layer, tgat_layer, EntityGraph, EntityInput, LayerGraph, ModelConfig,
    ModelSizes, Rgnn, TgatWeights, Variant,
};
use rgnn::numcore::{ParameterStore, Tape, Tensor};
use rgnn::wordgraph::{build_review_graph, EdgeType};

fn store_with(entries: &[(&str, Tensor)]) -> ParameterStore {
    let mut s = ParameterStore::new();
    for (n, t) in entries {
        s.insert(*n, t.clone()).unwrap();
    }
    s
}

fn weights(tape: &mut Tape) -> TgatWeights {
    TgatWeights {
        w1: tape.param("w1").unwrap(),
        w2: tape.param("w2").unwrap(),
        w3: Some(tape.param("w3").unwrap()),
        edge_emb: Some(tape.param("er").unwrap()),
        w4: tape.param("w4").unwrap(),
    }
}

#[test]
fn three_node_layer_by_hand() {
    let store = store_with(&[
        ("w1", Tensor::from_vec(1, 1, vec![1.0]).unwrap()),
        ("w2", Tensor::from_vec(1, 1, vec![2.0]).unwrap()),
        ("w3", Tensor::from_vec(1, 1, vec![0.5]).unwrap()),
        ("er", Tensor::column_vector(&[1.0, 2.0, 3.0])),
        ("w4", Tensor::from_vec(1, 1, vec![3.0]).unwrap()),
    ]);
    let graph = LayerGraph::from_edges(
        3,
        [
            (0, 1, EdgeType::Forward),
            (1, 0, EdgeType::Backward),
            (0, 0, EdgeType::SelfLoop),
            (1, 1, EdgeType::SelfLoop),
            (2, 2, EdgeType::SelfLoop),
        ],
    );
    let mut tape = Tape::new(&store);
    let w = weights(&mut tape);
    let x = tape.constant(Tensor::column_vector(&[1.0, 2.0, -1.0])).unwrap();
    let out = tgat_layer(&mut tape, &graph, x, &w, 0.2).unwrap();
    let h = tape.value(out.hidden);

    // Node 0 attends to node 1 (backward, logit 1·(4+1)=5) and itself (logit 1·(2+1.5)=3.5).
    let (a, b) = (5f64.exp(), 3.5f64.exp());
    let h0 = (a * 6.0 + b * 3.0) / (a + b);
    // Node 1 attends to node 0 (forward, logit 2·(2+0.5)=5) and itself (logit 2·(4+1.5)=11).
    let (a, b) = (5f64.exp(), 11f64.exp());
    let h1 = (a * 3.0 + b * 6.0) / (a + b);
    // Node 2 attends only to itself: logit −1·(−2+1.5)=0.5, weight 1.
    let h2 = -3.0;
    for (r, want) in [h0, h1, h2].into_iter().enumerate() {
        assert!((h.get(r, 0) - want).abs() < 1e-12, "node {r}: {} vs {want}", h.get(r, 0));
    }
}

#[test]
fn negative_logits_use_leaky_slope() {
    let store = store_with(&[
        ("w1", Tensor::from_vec(1, 1, vec![1.0]).unwrap()),
        ("w2", Tensor::from_vec(1, 1, vec![1.0]).unwrap()),
        ("w3", Tensor::from_vec(1, 1, vec![0.0]).unwrap()),
        ("er", Tensor::column_vector(&[0.0, 0.0, 0.0])),
        ("w4", Tensor::from_vec(1, 1, vec![1.0]).unwrap()),
    ]);
    let graph = LayerGraph::from_edges(2, [(1, 0, EdgeType::Backward), (0, 0, EdgeType::SelfLoop)]);
    let mut tape = Tape::new(&store);
    let w = weights(&mut tape);
    let x = tape.constant(Tensor::column_vector(&[1.0, -2.0])).unwrap();
    let out = tgat_layer(&mut tape, &graph, x, &w, 0.2).unwrap();
    // Logits: neighbor 1·(−2)=−2 → −0.4, self 1.
    let (a, b) = ((-0.4f64).exp(), 1f64.exp());
    let want = (a * -2.0 + b * 1.0) / (a + b);
    assert!((tape.value(out.hidden).get(0, 0) - want).abs() < 1e-12);
    assert_eq!(tape.value(out.hidden).get(1, 0), 0.0);
}

#[test]
fn isolated_node_without_self_loops_reads_zero() {
    let cfg = ModelConfig {
        d0: 4,
        d1: 4,
        d2: 4,
        ..ModelConfig::default()
    }
    .with_variant(Variant::NoSelfLoop);
    let single = build_review_graph(
        &[Review {
            words: vec![3],
            positions: vec![0],
        }],
        cfg.omega,
        0,
    )
    .unwrap();
    let g = EntityGraph::prepare(&single, &cfg.ablations);
    assert_eq!(g.layer.num_edges(), 0);
    assert_eq!(g.layer.isolated(), 1);
    let sizes = ModelSizes {
        words: 5,
        users: 1,
        items: 1,
    };
    let store = declare_parameters(&cfg, sizes, 4).unwrap();
    let model = Rgnn::new(cfg).unwrap();
    let y = model
        .predict(&store, EntityInput { row: Some(0), graph: &g }, EntityInput { row: Some(0), graph: &g })
        .unwrap();
    assert!(y.is_finite());

    let mut tape = Tape::new(&store);
    let w = TgatWeights {
        w1: tape.param("user.l1.w1").unwrap(),
        w2: tape.param("user.l1.w2").unwrap(),
        w3: tape.param("user.l1.w3").ok(),
        edge_emb: tape.param("user.l1.edge_emb").ok(),
        w4: tape.param("user.l1.w4").unwrap(),
    };
    let x = tape.constant(Tensor::filled(1, 4, 0.7)).unwrap();
    let out = tgat_layer(&mut tape, &g.layer, x, &w, 0.2).unwrap();
    assert!(tape.value(out.hidden).data().iter().all(|&v| v == 0.0));
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize, u8)>)> {
    (1usize..=12).prop_flat_map(|k| {
        let edge = (0..k, 0..k, 0u8..3);
        (Just(k), prop::collection::vec(edge, 0..40))
    })
}

fn dedup_edges(k: usize, edges: &[(usize, usize, u8)]) -> Vec<(usize, usize, EdgeType)> {
    let mut seen = vec![false; k * k];
    edges
        .iter()
        .filter(|(t, h, _)| !std::mem::replace(&mut seen[t * k + h], true))
        .map(|&(t, h, c)| (t, h, EdgeType::from_code(c).unwrap()))
        .collect()
}

fn random_store(d: usize, values: &[f64]) -> ParameterStore {
    let mut it = values.iter().cycle().copied();
    let mut m = |r: usize, c: usize| Tensor::from_vec(r, c, (0..r * c).map(|_| it.next().unwrap()).collect()).unwrap();
    store_with(&[
        ("w1", m(d, d)),
        ("w2", m(d, d)),
        ("w3", m(d, d)),
        ("er", m(3, d)),
        ("w4", m(d, d)),
        ("theta", m(1, d)),
        ("sw", m(1, d)),
    ])
}

/// Runs one attention layer and the importance scores.
fn layer_outputs(graph: &LayerGraph, store: &ParameterStore, x: Tensor) -> (Tensor, Tensor) {
    let mut tape = Tape::new(store);
    let w = weights(&mut tape);
    let x = tape.constant(x).unwrap();
    let out = tgat_layer(&mut tape, graph, x, &w, 0.2).unwrap();
    let theta = tape.param("theta").unwrap();
    let sw = tape.param("sw").unwrap();
    let beta = importance_scores(&mut tape, graph, out.hidden, theta, Some(sw)).unwrap();
    (tape.value(out.hidden).clone(), tape.value(beta).clone())
}

proptest! {
    #[test]
    fn relabeling_nodes_permutes_outputs(
        (k, edges) in graph_strategy(),
        d in 1usize..=4,
        values in prop::collection::vec(-1.0f64..1.0, 64),
        perm_seed in any::<u64>(),
    ) {
        let edges = dedup_edges(k, &edges);
        let store = random_store(d, &values);
        let mut perm: Vec<usize> = (0..k).collect();
        let mut s = perm_seed;
        for i in (1..k).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let x: Vec<f64> = (0..k * d).map(|i| values[(i * 7 + 3) % values.len()] * 2.0).collect();
        let mut xp = vec![0.0; k * d];
        for i in 0..k {
            xp[perm[i] * d..(perm[i] + 1) * d].copy_from_slice(&x[i * d..(i + 1) * d]);
        }
        let g = LayerGraph::from_edges(k, edges.iter().copied());
        let gp = LayerGraph::from_edges(k, edges.iter().map(|&(t, h, ty)| (perm[t], perm[h], ty)));
        let (h, b) = layer_outputs(&g, &store, Tensor::from_vec(k, d, x).unwrap());
        let (hp, bp) = layer_outputs(&gp, &store, Tensor::from_vec(k, d, xp).unwrap());
        for i in 0..k {
            prop_assert!((b.get(i, 0) - bp.get(perm[i], 0)).abs() < 1e-10);
            for c in 0..d {
                prop_assert!((h.get(i, c) - hp.get(perm[i], c)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gate_lies_in_upper_half_interval(
        (k, edges) in graph_strategy(),
        d in 1usize..=4,
        values in prop::collection::vec(-1.0f64..1.0, 64),
        alpha in 0.05f64..=1.0,
    ) {
        let edges = dedup_edges(k, &edges);
        let store = random_store(d, &values);
        let g = LayerGraph::from_edges(k, edges);
        let x: Vec<f64> = (0..k * d).map(|i| values[i % values.len()]).collect();
        let (_, beta) = layer_outputs(&g, &store, Tensor::from_vec(k, d, x).unwrap());
        prop_assert!(beta.data().iter().all(|&b| b >= 0.0));
        let mut tape = Tape::new(&store);
        let ones = tape.constant(Tensor::filled(k, 1, 1.0)).unwrap();
        let b = tape.constant(beta).unwrap();
        let pooled = pgp_layer(&mut tape, &g, ones, b, alpha).unwrap();
        prop_assert!(!pooled.selected.is_empty());
        for &gate in tape.value(pooled.features).data() {
            prop_assert!((0.5..1.0).contains(&gate), "gate {gate}");
        }
    }
}
