//! Kernel fuzzy relations, min-max lower/upper approximations and fuzzy
//! negative sampling.
//!
//! Nodes form the universe; their current embedding rows are the attribute
//! values. A kernel over embedding distances gives the fuzzy relation
//! `R(x, y)`. A candidate non-edge `(x, y)` is scored by how certainly `x`
//! falls into the decision class built around `y` and vice versa, and the
//! highest-scoring half of a random candidate pool is kept as negatives.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{FgatError, Result};
use crate::graph::{sample_negative_candidates, Edge, Graph, PairSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// `exp(−‖x−y‖²/δ)`
    #[default]
    Gaussian,
    /// `exp(−‖x−y‖/δ)`
    Exponential,
    /// `1 − ‖x−y‖²/(‖x−y‖² + δ)`
    RationalQuadratic,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Exponential => "exponential",
            Kernel::RationalQuadratic => "rational-quadratic",
        }
    }

    /// Kernel value from a squared distance.
    pub fn eval_sq<T: Scalar>(self, sq_dist: T, delta: T) -> T {
        match self {
            Kernel::Gaussian => (-sq_dist / delta).exp(),
            Kernel::Exponential => (-sq_dist.sqrt() / delta).exp(),
            Kernel::RationalQuadratic => T::one() - sq_dist / (sq_dist + delta),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = FgatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Kernel::Gaussian),
            "exponential" => Ok(Kernel::Exponential),
            "rational-quadratic" | "rational_quadratic" => Ok(Kernel::RationalQuadratic),
            other => Err(FgatError::InvalidArgument(format!(
                "unknown kernel {other:?} (expected gaussian, exponential or rational-quadratic)"
            ))),
        }
    }
}

/// Kernel plus bandwidth `δ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyRelationConfig<T> {
    pub kernel: Kernel,
    pub delta: T,
}

impl<T: Scalar> FuzzyRelationConfig<T> {
    pub fn new(kernel: Kernel, delta: T) -> Result<Self> {
        if !(delta.is_finite() && delta > T::zero()) {
            return Err(FgatError::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        Ok(Self { kernel, delta })
    }
}

fn sq_dist<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum()
}

pub fn kernel_similarity<T: Scalar>(x: &[T], y: &[T], cfg: &FuzzyRelationConfig<T>) -> Result<T> {
    if x.len() != y.len() {
        return Err(FgatError::Shape {
            op: "kernel_similarity",
            detail: format!("{} vs {}", x.len(), y.len()),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FgatError::NonFinite("kernel_similarity input"));
    }
    Ok(cfg.kernel.eval_sq(sq_dist(x, y), cfg.delta))
}

/// Reflexive, symmetric `N×N` fuzzy relation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    /// Wraps a row-major matrix after checking reflexivity, symmetry and range.
    pub fn from_values(n: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n * n {
            return Err(FgatError::Shape {
                op: "similarity_matrix",
                detail: format!("{} values for {n}x{n}", values.len()),
            });
        }
        for i in 0..n {
            if values[i * n + i] != T::one() {
                return Err(FgatError::InvalidArgument(format!("R({i},{i}) != 1")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(v >= T::zero() && v <= T::one()) || v != values[j * n + i] {
                    return Err(FgatError::InvalidArgument(format!(
                        "R({i},{j}) = {v} not a symmetric value in [0,1]"
                    )));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[x * self.n + y]
    }

    /// Coverage `[x]_R` as a membership row.
    pub fn row(&self, x: usize) -> &[T] {
        &self.values[x * self.n..(x + 1) * self.n]
    }
}

/// All pairwise squared distances between embedding rows, row-major `N×N`.
pub fn pairwise_sq_distances<T: Scalar>(embeddings: &Tensor<T>) -> Result<Vec<T>> {
    if !embeddings.is_finite() {
        return Err(FgatError::NonFinite("embeddings"));
    }
    let n = embeddings.rows();
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(embeddings.row(i), embeddings.row(j));
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    Ok(out)
}

/// Mean of `‖x−y‖²` over ordered pairs `x ≠ y`; the automatic bandwidth.
pub fn mean_sq_distance<T: Scalar>(sq: &[T], n: usize) -> T {
    if n < 2 {
        return T::one();
    }
    let total: T = sq.iter().copied().sum();
    total / T::from_usize_lossy(n * (n - 1))
}

pub fn relation_matrix<T: Scalar>(embeddings: &Tensor<T>, cfg: &FuzzyRelationConfig<T>) -> Result<SimilarityMatrix<T>> {
    let sq = pairwise_sq_distances(embeddings)?;
    Ok(relation_from_sq(&sq, embeddings.rows(), cfg))
}

fn relation_from_sq<T: Scalar>(sq: &[T], n: usize, cfg: &FuzzyRelationConfig<T>) -> SimilarityMatrix<T> {
    let mut values: Vec<T> = sq.iter().map(|&d| cfg.kernel.eval_sq(d, cfg.delta)).collect();
    for i in 0..n {
        values[i * n + i] = T::one();
    }
    SimilarityMatrix { n, values }
}

/// Membership of every node in one fuzzy decision class.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMembership<T> {
    values: Vec<T>,
}

impl<T: Scalar> DecisionMembership<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
            return Err(FgatError::InvalidArgument("memberships must lie in [0,1]".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn complement(&self) -> Self {
        Self {
            values: self.values.iter().map(|&v| T::one() - v).collect(),
        }
    }
}

fn check_approx_args<T: Scalar>(r: &SimilarityMatrix<T>, d: &[T], x: usize) -> Result<()> {
    if d.len() != r.len() {
        return Err(FgatError::Shape {
            op: "approximation",
            detail: format!("{} memberships for {} nodes", d.len(), r.len()),
        });
    }
    if x >= r.len() {
        return Err(FgatError::IndexOutOfRange { index: x, len: r.len() });
    }
    Ok(())
}

fn lower_of<T: Scalar>(row: &[T], d: &[T]) -> T {
    row.iter()
        .zip(d)
        .map(|(&r, &m)| (T::one() - r).max(m))
        .fold(T::one(), T::min)
}

/// `inf_y max(1 − R(x,y), d(y))`.
pub fn lower_approximation<T: Scalar>(r: &SimilarityMatrix<T>, d: &DecisionMembership<T>, x: usize) -> Result<T> {
    check_approx_args(r, d.values(), x)?;
    Ok(lower_of(r.row(x), d.values()))
}

/// `sup_y min(R(x,y), d(y))`.
pub fn upper_approximation<T: Scalar>(r: &SimilarityMatrix<T>, d: &DecisionMembership<T>, x: usize) -> Result<T> {
    check_approx_args(r, d.values(), x)?;
    Ok(r.row(x)
        .iter()
        .zip(d.values())
        .map(|(&rv, &m)| rv.min(m))
        .fold(T::zero(), T::max))
}

/// How the decision class `d_v` of a node is built from its closed
/// neighborhood `N[v]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionClass {
    /// `d_v(u) = max_{w ∈ N[v]} R(w, u)`: the neighborhood blurred by the
    /// relation (its upper approximation).
    #[default]
    Fuzzy,
    /// `d_v(u) = 1` iff `u ∈ N[v]`. Every true non-edge then scores 0,
    /// because the `y = x` term of the lower approximation is `d_v(x) = 0`.
    Crisp,
}

impl DecisionClass {
    pub fn name(self) -> &'static str {
        match self {
            DecisionClass::Fuzzy => "fuzzy",
            DecisionClass::Crisp => "crisp",
        }
    }
}

impl FromStr for DecisionClass {
    type Err = FgatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fuzzy" => Ok(DecisionClass::Fuzzy),
            "crisp" => Ok(DecisionClass::Crisp),
            other => Err(FgatError::InvalidArgument(format!(
                "unknown decision class {other:?} (expected fuzzy or crisp)"
            ))),
        }
    }
}

pub fn neighborhood_membership<T: Scalar>(
    graph: &Graph,
    relation: &SimilarityMatrix<T>,
    v: usize,
    class: DecisionClass,
) -> Vec<T> {
    let n = relation.len();
    match class {
        DecisionClass::Crisp => {
            let mut d = vec![T::zero(); n];
            for &u in graph.neighbors(v) {
                d[u] = T::one();
            }
            d
        }
        DecisionClass::Fuzzy => {
            let mut d = vec![T::zero(); n];
            for &w in graph.neighbors(v) {
                for (dv, &r) in d.iter_mut().zip(relation.row(w)) {
                    *dv = dv.max(r);
                }
            }
            d
        }
    }
}

/// `δ` policy for the per-epoch relation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    /// Mean squared pairwise distance of the current embeddings.
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Auto => f.write_str("auto"),
            Bandwidth::Fixed(d) => write!(f, "{d}"),
        }
    }
}

impl FromStr for Bandwidth {
    type Err = FgatError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        match s.parse::<f64>() {
            Ok(d) if d.is_finite() && d > 0.0 => Ok(Bandwidth::Fixed(d)),
            _ => Err(FgatError::InvalidArgument(format!(
                "delta must be \"auto\" or a positive number, got {s:?}"
            ))),
        }
    }
}

/// Settings of the negative-edge scorer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnsConfig {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
    pub alpha: f64,
    pub decision: DecisionClass,
}

impl Default for FnsConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Gaussian,
            bandwidth: Bandwidth::Auto,
            alpha: 0.5,
            decision: DecisionClass::Fuzzy,
        }
    }
}

impl FnsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FgatError::InvalidArgument("alpha must lie in [0,1]".into()));
        }
        if let Bandwidth::Fixed(d) = self.bandwidth {
            if !(d.is_finite() && d > 0.0) {
                return Err(FgatError::InvalidArgument("delta must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Relation and decision classes derived from one embedding snapshot.
#[derive(Debug)]
pub struct ScoringContext<'g, T> {
    graph: &'g Graph,
    relation: SimilarityMatrix<T>,
    memberships: Vec<T>,
    alpha: T,
    delta: T,
}

impl<'g, T: Scalar> ScoringContext<'g, T> {
    /// Builds the relation from `embeddings` (one row per node of `graph`)
    /// and the decision class of every node.
    pub fn new(graph: &'g Graph, embeddings: &Tensor<T>, cfg: &FnsConfig) -> Result<Self> {
        cfg.validate()?;
        let n = graph.num_nodes();
        if embeddings.rows() != n {
            return Err(FgatError::Shape {
                op: "scoring_context",
                detail: format!("{} embedding rows for {n} nodes", embeddings.rows()),
            });
        }
        let sq = pairwise_sq_distances(embeddings)?;
        let delta = match cfg.bandwidth {
            Bandwidth::Auto => {
                let m = mean_sq_distance(&sq, n);
                if m > T::zero() && m.is_finite() {
                    m
                } else {
                    T::one()
                }
            }
            Bandwidth::Fixed(d) => T::lit(d),
        };
        let rel_cfg = FuzzyRelationConfig::new(cfg.kernel, delta)?;
        let relation = relation_from_sq(&sq, n, &rel_cfg);
        Ok(Self::with_relation(graph, relation, T::lit(cfg.alpha), cfg.decision, delta))
    }

    /// Context over an explicit relation.
    pub fn with_relation(
        graph: &'g Graph,
        relation: SimilarityMatrix<T>,
        alpha: T,
        decision: DecisionClass,
        delta: T,
    ) -> Self {
        let n = relation.len();
        let mut memberships = Vec::with_capacity(n * n);
        for v in 0..n {
            memberships.extend(neighborhood_membership(graph, &relation, v, decision));
        }
        Self {
            graph,
            relation,
            memberships,
            alpha,
            delta,
        }
    }

    pub fn relation(&self) -> &SimilarityMatrix<T> {
        &self.relation
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    /// Decision class `d_v`.
    pub fn membership(&self, v: usize) -> &[T] {
        let n = self.relation.len();
        &self.memberships[v * n..(v + 1) * n]
    }

    /// `α·lower(d_y)(x) + (1−α)·lower(d_x)(y)`.
    pub fn score(&self, x: usize, y: usize) -> Result<T> {
        let n = self.relation.len();
        for id in [x, y] {
            if id >= n {
                return Err(FgatError::IndexOutOfRange { index: id, len: n });
            }
        }
        if x == y {
            return Err(FgatError::InvalidArgument(format!("cannot score self pair ({x},{x})")));
        }
        let lx = lower_of(self.relation.row(x), self.membership(y));
        let ly = lower_of(self.relation.row(y), self.membership(x));
        Ok(self.alpha * lx + (T::one() - self.alpha) * ly)
    }
}

pub fn edge_quality_score<T: Scalar>(ctx: &ScoringContext<'_, T>, x: usize, y: usize) -> Result<T> {
    ctx.score(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredEdge<T> {
    pub edge: Edge,
    pub score: T,
}

/// Score descending, then `src` ascending, then `dst` ascending.
pub fn rank_order<T: Scalar>(a: &ScoredEdge<T>, b: &ScoredEdge<T>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.edge.0.cmp(&b.edge.0))
        .then(a.edge.1.cmp(&b.edge.1))
}

/// The `k` best entries under [`rank_order`].
pub fn select_top<T: Scalar>(scored: &[ScoredEdge<T>], k: usize) -> Vec<ScoredEdge<T>> {
    let mut ranked = scored.to_vec();
    ranked.sort_by(rank_order);
    ranked.truncate(k);
    ranked
}

/// Scored candidate pool and the chosen negatives.
#[derive(Debug, Clone)]
pub struct NegativeSelection<T> {
    /// Every sampled candidate, in sampling order.
    pub candidates: Vec<ScoredEdge<T>>,
    /// The selected negatives, best first.
    pub selected: Vec<ScoredEdge<T>>,
}

impl<T: Scalar> NegativeSelection<T> {
    pub fn selected_edges(&self) -> Vec<Edge> {
        self.selected.iter().map(|s| s.edge).collect()
    }

    /// `(min, mean, max)` of the selected scores.
    pub fn score_summary(&self) -> (f64, f64, f64) {
        summarize(self.selected.iter().map(|s| s.score.as_f64()))
    }
}

pub(crate) fn summarize(values: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
        n += 1;
    }
    if n == 0 {
        (0.0, 0.0, 0.0)
    } else {
        (lo, sum / n as f64, hi)
    }
}

/// Draws `2·e_count` candidates outside `exclusion` and keeps the `e_count`
/// highest-scoring ones.
pub fn fuzzy_negative_sample<T: Scalar>(
    ctx: &ScoringContext<'_, T>,
    exclusion: &PairSet,
    e_count: usize,
    seed: u64,
) -> Result<NegativeSelection<T>> {
    let pool = sample_negative_candidates(ctx.graph().num_nodes(), exclusion, 2 * e_count, seed)?;
    let candidates = pool
        .candidates
        .iter()
        .map(|&(x, y)| Ok(ScoredEdge { edge: (x, y), score: ctx.score(x, y)? }))
        .collect::<Result<Vec<_>>>()?;
    let selected = select_top(&candidates, e_count);
    Ok(NegativeSelection { candidates, selected })
}
