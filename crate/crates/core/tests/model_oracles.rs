#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::HashSet;

use common::*;
use fgat_core::gradcheck::check_gradients;
use fgat_core::model::{fgat_layer_forward, link_logits, model_forward};
use fgat_core::{FgatModel, FgatParams, Graph, ModelConfig, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(layers: usize, dim: usize, heads: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        embedding_dim: dim,
        num_heads: heads,
        num_layers: layers,
        dropout: 0.0,
        seed,
        ..ModelConfig::default()
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Graph {
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    while edges.len() < m {
        let (s, d) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if s != d && seen.insert((s.min(d), s.max(d))) {
            edges.push((s, d));
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Default init with the layer-norm affine parameters moved off 1 and 0.
fn perturbed(config: &ModelConfig, n: usize, rng: &mut ChaCha8Rng) -> FgatParams<f64> {
    let mut p = FgatParams::init(config, n).unwrap();
    for layer in &mut p.layers {
        for v in layer.ln_gamma.data_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
        for v in layer.ln_beta.data_mut() {
            *v = rng.gen_range(-0.2..0.2);
        }
        for v in layer.proj_bias.data_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
    }
    p
}

#[test]
fn layer_forward_matches_hand_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for case in 0..20 {
        let n = rng.gen_range(2..=12);
        let m = rng.gen_range(1..=n).min(n * (n - 1) / 2);
        let g = random_graph(&mut rng, n, m);
        let heads = [1, 2, 4][case % 3];
        let c = cfg(1, 8, heads, case as u64);
        let params = perturbed(&c, n, &mut rng);
        let h = Tensor::<f64>::uniform(vec![n, 8], 1.0, &mut rng);
        let edges = g.message_edges();

        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let hv = tape.constant(h.clone());
        let out = fgat_layer_forward(&mut tape, &c, &bound.layers[0], hv, &edges, false, 0).unwrap();

        let adj = closed_neighborhoods(n, g.edges());
        let want = layer_brute(&to_mat(h.data(), 8), &params.layers[0], &adj, c.layer_norm_eps, c.leaky_slope);
        assert!(max_abs_diff(&want.output, tape.value(out.output).data()) < 1e-12);
        for (k, &att) in out.attention.iter().enumerate() {
            for (i, &w) in tape.value(att).data().iter().enumerate() {
                let (v, u) = (edges.dst[i], edges.src[i]);
                assert!((w - want.attention[k][v][u]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn attention_logits_match_hand_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let g = random_graph(&mut rng, 7, 9);
    let c = cfg(1, 6, 3, 4);
    let params = perturbed(&c, 7, &mut rng);
    let h = Tensor::<f64>::uniform(vec![7, 6], 1.0, &mut rng);
    let edges = g.message_edges();
    let adj = closed_neighborhoods(7, g.edges());
    let want = layer_brute(&to_mat(h.data(), 6), &params.layers[0], &adj, c.layer_norm_eps, c.leaky_slope);

    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let hv = tape.constant(h);
    let l = &bound.layers[0];
    let z = tape.layer_norm(hv, l.ln_gamma, l.ln_beta, c.layer_norm_eps).unwrap();
    for (k, &head) in l.heads.iter().enumerate() {
        let (logits, _) = fgat_core::model::attention_logits(&mut tape, head, z, &edges, c.leaky_slope).unwrap();
        for (i, &e) in tape.value(logits).data().iter().enumerate() {
            assert!((e - want.logits[k][edges.dst[i]][edges.src[i]]).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_rows_sum_to_one_and_norm_rows_are_centred() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..20u64 {
        let n = rng.gen_range(2..=40);
        let m = rng.gen_range(1..=n).min(n * (n - 1) / 2);
        let g = random_graph(&mut rng, n, m);
        let c = cfg(1, 16, 4, case);
        let params = FgatParams::<f64>::init(&c, n).unwrap();
        let h = Tensor::<f64>::uniform(vec![n, 16], 3.0, &mut rng);
        let edges = g.message_edges();
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let hv = tape.constant(h);
        let out = fgat_layer_forward(&mut tape, &c, &bound.layers[0], hv, &edges, false, 0).unwrap();
        for &att in &out.attention {
            let mut sums = vec![0.0; n];
            for (i, &w) in tape.value(att).data().iter().enumerate() {
                sums[edges.dst[i]] += w;
            }
            assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-12));
        }
        let l = &bound.layers[0];
        let z = tape.layer_norm(hv, l.ln_gamma, l.ln_beta, c.layer_norm_eps).unwrap();
        for r in 0..n {
            let row = tape.value(z).row(r);
            assert!((row.iter().sum::<f64>() / 16.0).abs() < 1e-10);
        }
    }
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let g = Graph::from_edges(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)]).unwrap();
    let edges = g.message_edges();
    let c = cfg(2, 8, 2, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(203);
    let params = perturbed(&c, 5, &mut rng);
    let pairs = [(0, 1), (2, 3), (0, 2), (1, 4), (0, 3), (2, 4)];
    let labels = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
    let tensors: Vec<Tensor<f64>> = params.tensors().into_iter().cloned().collect();
    let report = check_gradients(
        &tensors,
        |tape, vars| {
            let bound = params.bind_vars(vars)?;
            let h = model_forward(tape, &c, &bound, &edges, true, 7)?;
            let logits = link_logits(tape, h, &pairs)?;
            let probs = tape.sigmoid(logits)?;
            tape.bce_loss(probs, &labels)
        },
        1e-5,
        300,
        17,
    )
    .unwrap();
    assert!(report.probes.len() >= 200);
    assert!(report.max_rel_error() < 1e-4, "worst {:?}", report.worst());
}

#[test]
fn node_relabelling_permutes_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(204);
    let n = 9;
    let g = random_graph(&mut rng, n, 12);
    let c = cfg(2, 8, 2, 1);
    let model = FgatModel::<f64>::new(c, n).unwrap();
    let perm: Vec<usize> = {
        let mut p: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(p.as_mut_slice(), &mut rng);
        p
    };
    let g2 = Graph::from_edges(n, g.edges().iter().map(|&(s, d)| (perm[s], perm[d])).collect()).unwrap();
    let mut model2 = model.clone();
    for v in 0..n {
        for j in 0..8 {
            model2.params.embeddings.data_mut()[perm[v] * 8 + j] = model.params.embeddings.get2(v, j);
        }
    }
    let h = model.embed(&g.message_edges()).unwrap();
    let h2 = model2.embed(&g2.message_edges()).unwrap();
    for v in 0..n {
        for j in 0..8 {
            assert!((h.get2(v, j) - h2.get2(perm[v], j)).abs() < 1e-12);
        }
    }
}

#[test]
fn link_scores_are_symmetric_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(205);
    let g = random_graph(&mut rng, 10, 14);
    let model = FgatModel::<f64>::new(cfg(2, 8, 4, 2), 10).unwrap();
    let pairs: Vec<_> = (0..10).flat_map(|x| (0..10).map(move |y| (x, y))).collect();
    let p = model.predict(&g.message_edges(), &pairs).unwrap();
    for x in 0..10 {
        for y in 0..10 {
            assert_eq!(p[x * 10 + y], p[y * 10 + x]);
            assert!(p[x * 10 + y] > 0.0 && p[x * 10 + y] < 1.0);
        }
    }
}

#[test]
fn zero_dropout_training_pass_equals_eval() {
    let mut rng = ChaCha8Rng::seed_from_u64(206);
    let g = random_graph(&mut rng, 6, 7);
    let c = cfg(3, 8, 2, 3);
    let model = FgatModel::<f64>::new(c, 6).unwrap();
    let edges = g.message_edges();
    let mut tape = Tape::new();
    let b = model.params.bind(&mut tape, false);
    let h = model_forward(&mut tape, &c, &b, &edges, true, 99).unwrap();
    assert_eq!(tape.value(h), &model.embed(&edges).unwrap());
}

#[test]
fn f32_model_tracks_f64() {
    let mut rng = ChaCha8Rng::seed_from_u64(207);
    let g = random_graph(&mut rng, 8, 10);
    let c = cfg(2, 8, 2, 6);
    let m64 = FgatModel::<f64>::new(c, 8).unwrap();
    let m32 = FgatModel::<f32>::new(c, 8).unwrap();
    let h64 = m64.embed(&g.message_edges()).unwrap();
    let h32 = m32.embed(&g.message_edges()).unwrap();
    for (a, b) in h64.data().iter().zip(h32.data()) {
        assert!((a - *b as f64).abs() < 1e-4);
    }
}
