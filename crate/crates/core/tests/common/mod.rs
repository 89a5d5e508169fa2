//! Naive reference implementations used as test oracles. Everything here is
//! written against plain `Vec`s and explicit loops, independent of the
//! library code paths it checks.

#![allow(dead_code, clippy::needless_range_loop)]

use fgat_core::graph::Edge;
use fgat_core::model::LayerParams;
use fgat_core::{Kernel, Tensor};
use rand::Rng;

pub type Mat = Vec<Vec<f64>>;

/// Random reflexive, symmetric relation on `n` points.
pub fn random_relation<R: Rng>(n: usize, rng: &mut R) -> Mat {
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        r[i][i] = 1.0;
        for j in i + 1..n {
            let v: f64 = rng.gen();
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    r
}

pub fn lower_brute(r: &Mat, d: &[f64], x: usize) -> f64 {
    let mut best = f64::INFINITY;
    for y in 0..r.len() {
        let v = if 1.0 - r[x][y] > d[y] { 1.0 - r[x][y] } else { d[y] };
        if v < best {
            best = v;
        }
    }
    best
}

pub fn upper_brute(r: &Mat, d: &[f64], x: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for y in 0..r.len() {
        let v = if r[x][y] < d[y] { r[x][y] } else { d[y] };
        if v > best {
            best = v;
        }
    }
    best
}

pub fn kernel_brute(kernel: Kernel, x: &[f64], y: &[f64], delta: f64) -> f64 {
    let mut sq = 0.0;
    for i in 0..x.len() {
        sq += (x[i] - y[i]) * (x[i] - y[i]);
    }
    match kernel {
        Kernel::Gaussian => (-sq / delta).exp(),
        Kernel::Exponential => (-sq.sqrt() / delta).exp(),
        Kernel::RationalQuadratic => 1.0 - sq / (sq + delta),
    }
}

/// Closed neighborhoods straight from the edge list, ignoring direction.
pub fn closed_neighborhoods(n: usize, edges: &[Edge]) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for v in 0..n {
        adj[v][v] = true;
    }
    for &(s, d) in edges {
        adj[s][d] = true;
        adj[d][s] = true;
    }
    adj
}

/// Fuzzy decision class of `v`: for every `u`, the best relation value
/// between `u` and any member of `v`'s closed neighborhood.
pub fn fuzzy_class(r: &Mat, adj: &[Vec<bool>], v: usize) -> Vec<f64> {
    let n = r.len();
    let mut d = vec![0.0; n];
    for u in 0..n {
        for w in 0..n {
            if adj[v][w] && r[w][u] > d[u] {
                d[u] = r[w][u];
            }
        }
    }
    d
}

pub fn crisp_class(adj: &[Vec<bool>], v: usize) -> Vec<f64> {
    adj[v].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

pub fn score_brute(r: &Mat, classes: &[Vec<f64>], alpha: f64, x: usize, y: usize) -> f64 {
    alpha * lower_brute(r, &classes[y], x) + (1.0 - alpha) * lower_brute(r, &classes[x], y)
}

/// Scores every candidate, orders by (score desc, src asc, dst asc) and
/// keeps the first `k`.
pub fn top_k_brute(r: &Mat, classes: &[Vec<f64>], alpha: f64, candidates: &[Edge], k: usize) -> Vec<(Edge, f64)> {
    let mut scored: Vec<(Edge, f64)> = candidates
        .iter()
        .map(|&(x, y)| ((x, y), score_brute(r, classes, alpha, x, y)))
        .collect();
    // insertion sort keeps the comparison logic in plain sight
    for i in 1..scored.len() {
        let mut j = i;
        while j > 0 && brute_before(&scored[j], &scored[j - 1]) {
            scored.swap(j, j - 1);
            j -= 1;
        }
    }
    scored.truncate(k);
    scored
}

fn brute_before(a: &(Edge, f64), b: &(Edge, f64)) -> bool {
    if a.1 != b.1 {
        return a.1 > b.1;
    }
    if a.0 .0 != b.0 .0 {
        return a.0 .0 < b.0 .0;
    }
    a.0 .1 < b.0 .1
}

/// Pairwise ROC-AUC with half credit for ties.
pub fn roc_brute(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in pos {
        for &n in neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

pub fn to_mat(data: &[f64], cols: usize) -> Mat {
    data.chunks(cols).map(|c| c.to_vec()).collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Result of one attention block evaluated by hand.
pub struct LayerBrute {
    pub output: Mat,
    /// `attention[k][v][u]`, zero where `u` is not a neighbor of `v`.
    pub attention: Vec<Mat>,
    /// Pre-activation attention logits in the same layout.
    pub logits: Vec<Mat>,
}

/// One pre-norm block in evaluation mode, from the block definition.
pub fn layer_brute(h: &Mat, p: &LayerParams<f64>, adj: &[Vec<bool>], eps: f64, slope: f64) -> LayerBrute {
    let n = h.len();
    let dim = h[0].len();
    let gamma = p.ln_gamma.data();
    let beta = p.ln_beta.data();
    let mut z = vec![vec![0.0; dim]; n];
    for v in 0..n {
        let mean = h[v].iter().sum::<f64>() / dim as f64;
        let var = h[v].iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / dim as f64;
        for j in 0..dim {
            z[v][j] = (h[v][j] - mean) / (var + eps).sqrt() * gamma[j] + beta[j];
        }
    }

    let mut concat = vec![Vec::new(); n];
    let mut attention = Vec::new();
    let mut logits = Vec::new();
    for head in &p.heads {
        let fh = head.weight.shape()[1];
        let w = to_mat(head.weight.data(), fh);
        let a = head.attention.data();
        let proj = matmul(&z, &w);
        let mut e = vec![vec![0.0; n]; n];
        let mut alpha = vec![vec![0.0; n]; n];
        for v in 0..n {
            let mut max = f64::NEG_INFINITY;
            for u in 0..n {
                if adj[v][u] {
                    let mut s = 0.0;
                    for j in 0..fh {
                        s += a[j] * proj[v][j] + a[fh + j] * proj[u][j];
                    }
                    e[v][u] = leaky(s, slope);
                    max = max.max(e[v][u]);
                }
            }
            let mut total = 0.0;
            for u in 0..n {
                if adj[v][u] {
                    alpha[v][u] = (e[v][u] - max).exp();
                    total += alpha[v][u];
                }
            }
            for u in 0..n {
                alpha[v][u] /= total;
            }
            for j in 0..fh {
                let mut c = 0.0;
                for u in 0..n {
                    c += alpha[v][u] * proj[u][j];
                }
                concat[v].push(c);
            }
        }
        attention.push(alpha);
        logits.push(e);
    }

    let pw = to_mat(p.proj_weight.data(), dim);
    let proj = matmul(&concat, &pw);
    let bias = p.proj_bias.data();
    let output = (0..n)
        .map(|v| (0..dim).map(|j| h[v][j] + (proj[v][j] + bias[j]).max(0.0)).collect())
        .collect();
    LayerBrute {
        output,
        attention,
        logits,
    }
}

pub fn max_abs_diff(a: &Mat, b: &[f64]) -> f64 {
    a.iter()
        .flatten()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Kernel relation over embedding rows, with the bandwidth set to the mean
/// squared distance over ordered pairs of distinct rows.
pub fn brute_relation(emb: &Tensor<f64>, kernel: Kernel) -> (Mat, f64) {
    let n = emb.rows();
    let mut total = 0.0;
    for x in 0..n {
        for y in 0..n {
            if x != y {
                let mut sq = 0.0;
                for j in 0..emb.row_width() {
                    sq += (emb.get2(x, j) - emb.get2(y, j)) * (emb.get2(x, j) - emb.get2(y, j));
                }
                total += sq;
            }
        }
    }
    let delta = total / (n * (n - 1)) as f64;
    let mut r = vec![vec![1.0; n]; n];
    for x in 0..n {
        for y in 0..n {
            if x != y {
                r[x][y] = kernel_brute(kernel, emb.row(x), emb.row(y), delta);
            }
        }
    }
    (r, delta)
}
