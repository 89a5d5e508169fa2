//! Seeded surrogate co-authorship graphs.
//!
//! Authors are grouped into communities; each "paper" links a small team
//! drawn mostly from one community, with productive authors drawn more
//! often. The result has the clustering and heavy-tailed degrees of real
//! collaboration networks at a chosen node and edge count.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FgatError, Result};
use crate::graph::{Edge, Graph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollaborationSpec {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub community_size: usize,
    pub max_team: usize,
    /// Probability that a team member is drawn from another community.
    pub cross_community: f64,
}

impl CollaborationSpec {
    pub fn new(num_nodes: usize, num_edges: usize) -> Self {
        Self {
            num_nodes,
            num_edges,
            community_size: 12,
            max_team: 4,
            cross_community: 0.05,
        }
    }
}

/// Stores every collaboration once as `(a, b)` with `a < b`.
pub fn collaboration_graph(spec: &CollaborationSpec, seed: u64) -> Result<Graph> {
    let n = spec.num_nodes;
    let max_edges = n * n.saturating_sub(1) / 2;
    if n < 2 || spec.num_edges == 0 || spec.num_edges > max_edges || spec.community_size < 2 {
        return Err(FgatError::InvalidArgument(format!(
            "cannot build {} collaborations among {n} authors",
            spec.num_edges
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let communities: Vec<Vec<usize>> = ids.chunks(spec.community_size).map(<[usize]>::to_vec).collect();
    let productivity: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05f64..1.0).powf(-0.8)).collect();

    let mut seen: HashSet<Edge> = HashSet::new();
    let mut edges = Vec::with_capacity(spec.num_edges);
    let mut add = |a: usize, b: usize, edges: &mut Vec<Edge>| {
        if a != b && edges.len() < spec.num_edges {
            let e = (a.min(b), a.max(b));
            if seen.insert(e) {
                edges.push(e);
            }
        }
    };

    let pick = |pool: &[usize], rng: &mut ChaCha8Rng| -> usize {
        let total: f64 = pool.iter().map(|&v| productivity[v]).sum();
        let mut t = rng.gen_range(0.0..total);
        for &v in pool {
            t -= productivity[v];
            if t <= 0.0 {
                return v;
            }
        }
        pool[pool.len() - 1]
    };

    // every author gets at least one co-author while the budget lasts
    for community in &communities {
        for (i, &v) in community.iter().enumerate() {
            if community.len() > 1 {
                let other = community[(i + 1 + rng.gen_range(0..community.len() - 1)) % community.len()];
                add(v, other, &mut edges);
            }
        }
    }

    let mut stalls = 0;
    while edges.len() < spec.num_edges {
        let community = &communities[rng.gen_range(0..communities.len())];
        let size = rng.gen_range(2..=spec.max_team.max(2));
        let mut team: Vec<usize> = Vec::with_capacity(size);
        for _ in 0..size {
            let member = if rng.gen_bool(spec.cross_community) {
                rng.gen_range(0..n)
            } else {
                pick(community, &mut rng)
            };
            if !team.contains(&member) {
                team.push(member);
            }
        }
        let before = edges.len();
        for i in 0..team.len() {
            for j in i + 1..team.len() {
                add(team[i], team[j], &mut edges);
            }
        }
        stalls = if edges.len() == before { stalls + 1 } else { 0 };
        if stalls > 10_000 {
            // communities saturated; fall back to uniform pairs
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            add(a, b, &mut edges);
        }
    }
    Graph::from_edges(n, edges)
}

/// Surrogate with the node and edge counts of ca-netscience.
pub fn netscience_like(seed: u64) -> Graph {
    collaboration_graph(&CollaborationSpec::new(379, 914), seed).expect("valid surrogate spec")
}

/// Surrogate with the node and edge counts of ca-sandi-auths.
pub fn sandi_like(seed: u64) -> Graph {
    let spec = CollaborationSpec {
        community_size: 8,
        max_team: 3,
        ..CollaborationSpec::new(86, 124)
    };
    collaboration_graph(&spec, seed).expect("valid surrogate spec")
}
