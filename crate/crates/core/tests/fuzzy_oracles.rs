#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::HashSet;

use common::*;
use fgat_core::fuzzy::{
    fuzzy_negative_sample, kernel_similarity, lower_approximation, upper_approximation, DecisionMembership,
    FuzzyRelationConfig,
};
use fgat_core::graph::{sample_negative_candidates, Edge};
use fgat_core::{Bandwidth, DecisionClass, FnsConfig, Graph, Kernel, ScoringContext, SimilarityMatrix, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KERNELS: [Kernel; 3] = [Kernel::Gaussian, Kernel::Exponential, Kernel::RationalQuadratic];

fn instance(rng: &mut ChaCha8Rng) -> (Mat, SimilarityMatrix<f64>, Vec<f64>) {
    let n = rng.gen_range(1..=20);
    let r = random_relation(n, rng);
    let sm = SimilarityMatrix::from_values(n, r.iter().flatten().copied().collect()).unwrap();
    let d: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    (r, sm, d)
}

#[test]
fn approximations_match_double_loop_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let (r, sm, d) = instance(&mut rng);
        let dm = DecisionMembership::new(d.clone()).unwrap();
        for x in 0..r.len() {
            let lo = lower_approximation(&sm, &dm, x).unwrap();
            let up = upper_approximation(&sm, &dm, x).unwrap();
            assert_eq!(lo.to_bits(), lower_brute(&r, &d, x).to_bits());
            assert_eq!(up.to_bits(), upper_brute(&r, &d, x).to_bits());
        }
    }
}

#[test]
fn sandwich_duality_and_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let (r, sm, d) = instance(&mut rng);
        let dm = DecisionMembership::new(d.clone()).unwrap();
        let bigger: Vec<f64> = d.iter().map(|&v| (v + rng.gen::<f64>() * (1.0 - v)).min(1.0)).collect();
        let bm = DecisionMembership::new(bigger).unwrap();
        for x in 0..r.len() {
            let lo = lower_approximation(&sm, &dm, x).unwrap();
            let up = upper_approximation(&sm, &dm, x).unwrap();
            assert!(lo <= d[x] && d[x] <= up);
            let dual = 1.0 - lower_approximation(&sm, &dm.complement(), x).unwrap();
            assert_eq!(up, dual);
            assert!(lo <= lower_approximation(&sm, &bm, x).unwrap());
            assert!(up <= upper_approximation(&sm, &bm, x).unwrap());
        }
    }
}

#[test]
fn kernel_axioms_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for kernel in KERNELS {
        for _ in 0..1000 {
            let f = rng.gen_range(1..=8);
            let x: Vec<f64> = (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let delta = rng.gen_range(0.1..4.0);
            let cfg = FuzzyRelationConfig::new(kernel, delta).unwrap();
            let kxy = kernel_similarity(&x, &y, &cfg).unwrap();
            assert_eq!(kernel_similarity(&x, &x, &cfg).unwrap(), 1.0);
            assert_eq!(kxy, kernel_similarity(&y, &x, &cfg).unwrap());
            assert!(kxy > 0.0 && kxy <= 1.0);
            assert_eq!(kxy.to_bits(), kernel_brute(kernel, &x, &y, delta).to_bits());
            // push y further away along the same direction
            let far: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + 1.5 * (b - a)).collect();
            assert!(kernel_similarity(&x, &far, &cfg).unwrap() < kxy);
        }
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let target = rng.gen_range(n / 2..=n + n / 2).max(1);
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    while edges.len() < target {
        let (s, d) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if s != d && !seen.contains(&(s, d)) && !seen.contains(&(d, s)) {
            seen.insert((s, d));
            edges.push((s, d));
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

#[test]
fn fns_matches_score_all_sort_prefix() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for case in 0..50u64 {
        let n = rng.gen_range(4..=30);
        let g = random_graph(&mut rng, n);
        let emb = Tensor::uniform(vec![n, 6], 1.0, &mut rng);
        let kernel = KERNELS[case as usize % 3];
        let decision = if case % 5 == 4 { DecisionClass::Crisp } else { DecisionClass::Fuzzy };
        let alpha = [0.5, 0.0, 1.0, 0.3][case as usize % 4];
        let cfg = FnsConfig {
            kernel,
            bandwidth: Bandwidth::Auto,
            alpha,
            decision,
        };
        let ctx = ScoringContext::new(&g, &emb, &cfg).unwrap();
        let (r, delta) = brute_relation(&emb, kernel);
        assert_eq!(ctx.delta(), delta);
        let adj = closed_neighborhoods(n, g.edges());
        let classes: Vec<Vec<f64>> = (0..n)
            .map(|v| match decision {
                DecisionClass::Fuzzy => fuzzy_class(&r, &adj, v),
                DecisionClass::Crisp => crisp_class(&adj, v),
            })
            .collect();

        let excl = g.symmetric_pairs();
        let e = g.num_edges().min((n * (n - 1) - excl.len()) / 2);
        let sel = fuzzy_negative_sample(&ctx, &excl, e, 1000 + case).unwrap();
        let pool: Vec<Edge> = sample_negative_candidates(n, &excl, 2 * e, 1000 + case).unwrap().candidates;
        let want = top_k_brute(&r, &classes, alpha, &pool, e);
        let got: Vec<(Edge, u64)> = sel.selected.iter().map(|s| (s.edge, s.score.to_bits())).collect();
        let want: Vec<(Edge, u64)> = want.iter().map(|&(e, s)| (e, s.to_bits())).collect();
        assert_eq!(got, want, "case {case}");
        assert!(sel.selected.iter().all(|s| !excl.contains(&s.edge)));
    }
}

#[test]
fn crisp_scores_vanish_on_non_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let g = random_graph(&mut rng, 12);
    let emb = Tensor::<f64>::uniform(vec![12, 4], 1.0, &mut rng);
    let cfg = FnsConfig {
        decision: DecisionClass::Crisp,
        ..FnsConfig::default()
    };
    let ctx = ScoringContext::new(&g, &emb, &cfg).unwrap();
    let excl = g.symmetric_pairs();
    for x in 0..12 {
        for y in 0..12 {
            if x != y && !excl.contains(&(x, y)) {
                assert_eq!(ctx.score(x, y).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn fixed_bandwidth_is_used() {
    let g = Graph::from_edges(3, vec![(0, 1)]).unwrap();
    let emb = Tensor::matrix(3, 1, vec![0.0, 1.0, 3.0]).unwrap();
    let cfg = FnsConfig {
        bandwidth: Bandwidth::Fixed(2.0),
        ..FnsConfig::default()
    };
    let ctx = ScoringContext::new(&g, &emb, &cfg).unwrap();
    assert_eq!(ctx.delta(), 2.0);
    assert_eq!(ctx.relation().get(0, 2), (-4.5f64).exp());
    let auto = ScoringContext::new(&g, &emb, &FnsConfig::default()).unwrap();
    // ordered-pair mean of 1, 9, 4
    assert_eq!(auto.delta(), 28.0 / 6.0);
}
