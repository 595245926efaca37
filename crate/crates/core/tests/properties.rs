mod common;

use common::{oracles, reference};
use get_core::audit::{deviation, random_graph, sample_rigid};
use get_core::complex_json::{graph_from_json, graph_to_json};
use get_core::heads::pool;
use get_core::layers::{bilevel_attention, embed, equivariant_ffn, equivariant_layernorm, GraphIndex, State};
use get_core::metrics::{auroc, average_ranks, pearson, spearman};
use get_core::model::{Model, ModelConfig};
use get_core::repr::{build_knn_graph, interface_survivors, ComplexGraph};
use get_core::synthetic::{make_regression_dataset, regression_label, Flavor, GeneratorOptions};
use get_core::trainer::dynamic_batches;
use get_tensor::{Index, Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_model(seed: u64) -> Model {
    let cfg = ModelConfig {
        d_h: 8,
        d_r: 4,
        d_e: 4,
        n_layers: 2,
        ..Default::default()
    };
    Model::init(cfg, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_matches_brute_force(seed in any::<u64>(), b in 1usize..30, k in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = oracles::lattice_blocks(&mut rng, b, 3);
        prop_assert_eq!(build_knn_graph(&blocks, k), oracles::brute_knn(&blocks, k));
    }

    #[test]
    fn every_block_gets_self_then_nearest(seed in any::<u64>(), b in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, b..=b, 1..=4, 9);
        for i in 0..b {
            let n: Vec<_> = g.neighbors(i).collect();
            prop_assert_eq!(n.len(), 1 + (b - 1).min(9));
            prop_assert_eq!(n[0].src, i);
        }
    }

    #[test]
    fn interface_grows_with_cutoff(seed in any::<u64>(), c1 in 0.0f64..8.0, extra in 0.0f64..8.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 3..=15, 1..=4, 9);
        let small = interface_survivors(g.blocks(), c1);
        let large = interface_survivors(g.blocks(), c1 + extra);
        prop_assert!(small.iter().all(|i| large.contains(i)));
    }

    #[test]
    fn pooling_ignores_atom_and_block_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = (0..rng.random_range(1..8)).map(|_| rng.random_range(1..5)).collect();
        let d = 5;
        let rows: Vec<Vec<Vec<f64>>> = sizes
            .iter()
            .map(|&n| (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect())
            .collect();
        let flatten = |order: &[usize], flip: bool| {
            let mut data = Vec::new();
            let mut owner = Vec::new();
            for (slot, &bi) in order.iter().enumerate() {
                let mut atoms = rows[bi].clone();
                if flip {
                    atoms.reverse();
                }
                for a in atoms {
                    data.extend(a);
                    owner.push(slot);
                }
            }
            let n = owner.len();
            let idx: Index = owner.into();
            pool(&Tensor::new(vec![n, d], data).unwrap(), &idx, order.len()).unwrap().graph_vec
        };
        let order: Vec<usize> = (0..sizes.len()).collect();
        let reversed: Vec<usize> = order.iter().rev().cloned().collect();
        let a = flatten(&order, false);
        let b = flatten(&reversed, true);
        prop_assert!(deviation(a.data(), b.data()).abs <= 1e-12);
        prop_assert!((a.l2_norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn spearman_is_pearson_on_ranks(seed in any::<u64>(), n in 2usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Rounded values produce ties.
        let x: Vec<f64> = (0..n).map(|_| (rng.random_range(0.0..5.0f64)).round()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = spearman(&x, &y).unwrap().value;
        let p = pearson(&average_ranks(&x), &average_ranks(&y)).unwrap().value;
        prop_assert!((s - p).abs() <= 1e-12);
    }

    #[test]
    fn auroc_is_pairwise_concordance(seed in any::<u64>(), n in 2usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0.0..1.0f64) * 10.0).round() / 10.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let a = auroc(&scores, &labels).unwrap().value;
        prop_assert!((a - oracles::concordance(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn batches_are_greedy_and_complete(sizes in prop::collection::vec(1usize..20, 1..60), extra in 0usize..30) {
        let budget = sizes.iter().max().unwrap() + extra;
        let batches = dynamic_batches(&sizes, budget).unwrap();
        let flat: Vec<usize> = batches.iter().flatten().cloned().collect();
        prop_assert_eq!(flat, (0..sizes.len()).collect::<Vec<_>>());
        for (n, b) in batches.iter().enumerate() {
            let used: usize = b.iter().map(|&i| sizes[i]).sum();
            prop_assert!(used <= budget);
            if let Some(next) = batches.get(n + 1) {
                prop_assert!(used + sizes[next[0]] > budget);
            }
        }
    }

    #[test]
    fn graph_json_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 2..=12, 1..=5, 9);
        let text = graph_to_json(&g);
        let back = graph_from_json(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(graph_to_json(&back), text);
    }

    #[test]
    fn synthetic_labels_are_rigid_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = make_regression_dataset(1, Flavor::LbaLike, &GeneratorOptions::default(), &mut rng).unwrap();
        let reflect = rng.random_bool(0.5);
        let t = sample_rigid(&mut rng, reflect);
        let moved = t.apply_graph(&s[0].graph);
        prop_assert!((regression_label(moved.blocks()) - s[0].label).abs() <= 1e-9 * s[0].label.abs().max(1.0));
    }
}

#[test]
fn layers_match_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..10 {
        let model = small_model(trial);
        let g = random_graph(&mut rng, 2..=8, 1..=4, 4);
        let enc = model.encode(&g).unwrap();
        let dense = reference::forward(&model, &g);
        let dh = deviation(enc.h.data(), &reference::flat_h(&dense));
        let dx = deviation(enc.x.data(), &reference::flat_x(&dense));
        assert!(dh.rel <= 1e-12 && dx.rel <= 1e-12, "trial {trial}: {dh:?} {dx:?}");
        let y = model.predict_affinity(&g, 0).unwrap();
        let want = reference::affinity(&model, &g, 0);
        assert!((y - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn attention_weights_match_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let model = small_model(3);
    let g = random_graph(&mut rng, 5..=7, 1..=4, 3);
    let idx = GraphIndex::new(&g).unwrap();
    let tape = Tape::new();
    let b = model.store.bind(&tape);
    let (s, e) = embed(&model.stack, &b, &idx).unwrap();
    let (_, w) = bilevel_attention(&model.stack.layers[0], &b, &idx, &e, &s).unwrap();
    let (_, dense) = reference::attention(&model, &model.stack.layers[0], &g, &reference::embed(&model, &g));
    let beta = w.beta.value().data();
    for (k, &e) in idx.edge_order.iter().enumerate() {
        assert!((beta[k] - dense.beta[e]).abs() <= 1e-14);
    }
    for i in 0..g.n_blocks() {
        let total: f64 = (0..g.edges().len()).filter(|&e| g.edges()[e].dst == i).map(|e| dense.beta[e]).sum();
        assert!((total - 1.0).abs() <= 1e-14);
    }
}

#[test]
fn layernorm_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = small_model(0);
    let p = &model.stack.layers[0];
    for _ in 0..20 {
        let n = rng.random_range(1..40);
        let tape = Tape::new();
        let b = model.store.bind(&tape);
        let scale = rng.random_range(0.1..20.0);
        let h = tape.leaf(Tensor::new(vec![n, 8], (0..n * 8).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap());
        let x = tape.leaf(Tensor::new(vec![n, 3], (0..n * 3).map(|_| scale * rng.random_range(-3.0..3.0)).collect()).unwrap());
        let before = x.value().clone();
        let out = equivariant_layernorm(&p.ln_att, p.ln_eps, &b, &State { h, x }).unwrap();
        let (xo, ho) = (out.x.value(), out.h.value());
        for c in 0..3 {
            let m0: f64 = (0..n).map(|r| before.get(r, c)).sum::<f64>() / n as f64;
            let m1: f64 = (0..n).map(|r| xo.get(r, c)).sum::<f64>() / n as f64;
            assert!((m0 - m1).abs() <= 1e-9);
        }
        if n > 1 {
            let e: Vec<f64> = (0..3).map(|c| (0..n).map(|r| xo.get(r, c)).sum::<f64>() / n as f64).collect();
            let var: f64 = (0..n).flat_map(|r| (0..3).map(move |c| (r, c))).map(|(r, c)| (xo.get(r, c) - e[c]).powi(2)).sum::<f64>() / (3 * n) as f64;
            assert!((var - 1.0).abs() <= 1e-6, "var {var}");
        }
        for r in 0..n {
            let row = ho.row(r);
            let m = row.iter().sum::<f64>() / 8.0;
            let v = row.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 8.0;
            assert!(m.abs() <= 1e-12 && (v - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn degenerate_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let model = small_model(5);
    let p = &model.stack.layers[0];
    let g = random_graph(&mut rng, 6..=6, 1..=1, 9);
    let idx = GraphIndex::new(&g).unwrap();
    let tape = Tape::new();
    let b = model.store.bind(&tape);
    let (s, _) = embed(&model.stack, &b, &idx).unwrap();
    let out = equivariant_ffn(p, &b, &idx, &s).unwrap();
    assert_eq!(out.x.value(), s.x.value());

    let single = ComplexGraph::new(vec![g.blocks()[0].clone()], 9).unwrap();
    let idx = GraphIndex::new(&single).unwrap();
    let (s, e) = embed(&model.stack, &b, &idx).unwrap();
    let (_, w) = bilevel_attention(p, &b, &idx, &e, &s).unwrap();
    assert_eq!(w.beta.value().data(), &[1.0]);
}
