//! Directed graph storage, edge-list IO, seeded edge splits and negative
//! candidate sampling.
//!
//! Stored edges keep their direction. Message passing treats every stored
//! edge as bidirectional and adds a self-loop to each node, so every
//! neighborhood `N(v)` contains `v`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FgatError, Result};

/// Directed pair `(src, dst)` of dense node ids.
pub type Edge = (usize, usize);

/// Set of ordered pairs.
pub type PairSet = HashSet<Edge>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    directed: bool,
    neighbors: Vec<Vec<usize>>,
    labels: Vec<i64>,
}

impl Graph {
    /// Builds a graph over `num_nodes` dense ids labelled `0..num_nodes`.
    pub fn from_edges(num_nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        let labels = (0..num_nodes as i64).collect();
        Self::with_labels(labels, edges)
    }

    /// Builds a graph whose node `i` carries the original file label `labels[i]`.
    pub fn with_labels(labels: Vec<i64>, edges: Vec<Edge>) -> Result<Self> {
        let num_nodes = labels.len();
        let mut seen = PairSet::with_capacity(edges.len());
        for &(s, d) in &edges {
            if s >= num_nodes || d >= num_nodes {
                return Err(FgatError::InvalidGraph(format!(
                    "edge ({s},{d}) out of range for {num_nodes} nodes"
                )));
            }
            if s == d {
                return Err(FgatError::InvalidGraph(format!("self-loop on node {s}")));
            }
            if !seen.insert((s, d)) {
                return Err(FgatError::InvalidGraph(format!("duplicate edge ({s},{d})")));
            }
        }
        let mut neighbors: Vec<Vec<usize>> = (0..num_nodes).map(|v| vec![v]).collect();
        for &(s, d) in &edges {
            neighbors[s].push(d);
            neighbors[d].push(s);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            num_nodes,
            edges,
            directed: true,
            neighbors,
            labels,
        })
    }

    /// Same node set, different edge list. Used to build the training
    /// message-passing graph from a split.
    pub fn with_edge_subset(&self, edges: Vec<Edge>) -> Result<Self> {
        Self::with_labels(self.labels.clone(), edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Closed message-passing neighborhood of `v`, sorted ascending.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    /// Original label of every dense id.
    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Every stored edge in both directions.
    pub fn symmetric_pairs(&self) -> PairSet {
        self.edges.iter().flat_map(|&(s, d)| [(s, d), (d, s)]).collect()
    }

    /// Flattened `(destination, source)` message list: for each `v` in id
    /// order, one entry per `u ∈ N(v)`.
    pub fn message_edges(&self) -> MessageEdges {
        let total = self.neighbors.iter().map(Vec::len).sum();
        let mut dst = Vec::with_capacity(total);
        let mut src = Vec::with_capacity(total);
        for (v, list) in self.neighbors.iter().enumerate() {
            for &u in list {
                dst.push(v);
                src.push(u);
            }
        }
        MessageEdges {
            num_nodes: self.num_nodes,
            dst,
            src,
        }
    }
}

/// Message-passing topology: entry `i` sends from `src[i]` into `dst[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageEdges {
    pub num_nodes: usize,
    pub dst: Vec<usize>,
    pub src: Vec<usize>,
}

impl MessageEdges {
    pub fn len(&self) -> usize {
        self.dst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dst.is_empty()
    }

    /// Only self-loops, as in a graph with no edges.
    pub fn self_loops(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            dst: (0..num_nodes).collect(),
            src: (0..num_nodes).collect(),
        }
    }
}

/// Counts of lines dropped while loading an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub lines_read: usize,
    pub duplicates_dropped: usize,
    pub self_loops_dropped: usize,
}

/// Reads a whitespace-separated edge list. Labels are relabelled densely in
/// ascending label order, which also maps 1-based files onto `0..N`.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<(Graph, LoadStats)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FgatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_edge_list(&text, path)
}

/// Parses edge-list text; `origin` only appears in error messages.
pub fn parse_edge_list(text: &str, origin: &Path) -> Result<(Graph, LoadStats)> {
    let mut stats = LoadStats::default();
    let mut raw: Vec<(i64, i64)> = Vec::new();
    let mut matrix_market = false;
    let mut size_line_pending = false;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('%') || trimmed.starts_with('#') {
            if idx == 0 && trimmed.starts_with("%%MatrixMarket") {
                matrix_market = true;
                size_line_pending = true;
            }
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let mut next_id = |what: &str| -> Result<i64> {
            let tok = tokens.next().ok_or_else(|| FgatError::Parse {
                path: origin.to_path_buf(),
                line: line_no,
                message: format!("missing {what} node id"),
            })?;
            tok.parse::<i64>().map_err(|_| FgatError::Parse {
                path: origin.to_path_buf(),
                line: line_no,
                message: format!("invalid {what} node id {tok:?}"),
            })
        };
        let src = next_id("source")?;
        let dst = next_id("target")?;
        if matrix_market && size_line_pending {
            // "rows cols nnz" header of a coordinate file
            size_line_pending = false;
            continue;
        }
        stats.lines_read += 1;
        raw.push((src, dst));
    }

    let mut label_ids = BTreeMap::new();
    for &(s, d) in &raw {
        label_ids.insert(s, 0usize);
        label_ids.insert(d, 0usize);
    }
    for (dense, id) in label_ids.values_mut().enumerate() {
        *id = dense;
    }
    let labels: Vec<i64> = label_ids.keys().copied().collect();

    let mut seen = PairSet::with_capacity(raw.len());
    let mut edges = Vec::with_capacity(raw.len());
    for (s, d) in raw {
        if s == d {
            stats.self_loops_dropped += 1;
            continue;
        }
        let pair = (label_ids[&s], label_ids[&d]);
        if !seen.insert(pair) {
            stats.duplicates_dropped += 1;
            continue;
        }
        edges.push(pair);
    }
    if edges.is_empty() {
        return Err(FgatError::EmptyGraph);
    }
    Ok((Graph::with_labels(labels, edges)?, stats))
}

/// Renders edges with their original labels, one `src dst` pair per line.
pub fn format_edge_list(labels: &[i64], edges: &[Edge]) -> String {
    let mut out = String::with_capacity(edges.len() * 8);
    for &(s, d) in edges {
        let _ = writeln!(out, "{} {}", labels[s], labels[d]);
    }
    out
}

pub fn write_edge_list(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    write_edges(graph.labels(), graph.edges(), path)
}

pub fn write_edges(labels: &[i64], edges: &[Edge], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_edge_list(labels, edges)).map_err(|source| FgatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = Self {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        let ok = parts.iter().all(|p| p.is_finite() && *p > 0.0)
            && (parts.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(FgatError::InvalidRatios(parts))
        }
    }

    /// `(floor(train·E), floor(val·E), remainder)`.
    pub fn sizes(&self, total: usize) -> (usize, usize, usize) {
        // 1e-9 absorbs products like 0.7 * 10 landing just under an integer
        let floor = |r: f64| ((r * total as f64) + 1e-9).floor() as usize;
        let train = floor(self.train).min(total);
        let validation = floor(self.validation).min(total - train);
        (train, validation, total - train - validation)
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSplit {
    pub train: Vec<Edge>,
    pub validation: Vec<Edge>,
    pub test: Vec<Edge>,
    pub seed: u64,
}

/// Seeded uniform permutation of the edge list cut into contiguous
/// train/validation/test blocks.
pub fn split_edges(graph: &Graph, ratios: SplitRatios, seed: u64) -> Result<EdgeSplit> {
    ratios.validate()?;
    let mut edges = graph.edges().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);
    let (n_train, n_val, n_test) = ratios.sizes(edges.len());
    for (n, name) in [(n_train, "train"), (n_val, "validation"), (n_test, "test")] {
        if n == 0 {
            return Err(FgatError::EmptySplit(name));
        }
    }
    let test = edges.split_off(n_train + n_val);
    let validation = edges.split_off(n_train);
    Ok(EdgeSplit {
        train: edges,
        validation,
        test,
        seed,
    })
}

/// Distinct negative candidates together with the pairs that were never
/// eligible.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub candidates: Vec<Edge>,
    pub exclusion: PairSet,
}

/// Number of ordered non-self-loop pairs outside `exclusion`:
/// `N·(N−1) − |exclusion ∩ eligible|`.
pub fn eligible_pool_size(num_nodes: usize, exclusion: &PairSet) -> usize {
    let excluded = exclusion
        .iter()
        .filter(|&&(s, d)| s != d && s < num_nodes && d < num_nodes)
        .count();
    num_nodes * num_nodes.saturating_sub(1) - excluded
}

/// Samples `count` distinct ordered pairs uniformly without replacement from
/// the non-self-loop pairs outside `exclusion`.
pub fn sample_negative_candidates(
    num_nodes: usize,
    exclusion: &PairSet,
    count: usize,
    seed: u64,
) -> Result<CandidateSet> {
    let available = eligible_pool_size(num_nodes, exclusion);
    if count > available {
        return Err(FgatError::InsufficientPairs {
            requested: count,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = if count * 4 >= available {
        // dense regime: enumerate the pool and draw an index subset
        let pool: Vec<Edge> = (0..num_nodes)
            .flat_map(|s| (0..num_nodes).map(move |d| (s, d)))
            .filter(|&(s, d)| s != d && !exclusion.contains(&(s, d)))
            .collect();
        rand::seq::index::sample(&mut rng, pool.len(), count)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    } else {
        let mut chosen = PairSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let s = rng.gen_range(0..num_nodes);
            let d = rng.gen_range(0..num_nodes);
            if s == d || exclusion.contains(&(s, d)) || !chosen.insert((s, d)) {
                continue;
            }
            out.push((s, d));
        }
        out
    };
    Ok(CandidateSet {
        candidates,
        exclusion: exclusion.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<(Graph, LoadStats)> {
        parse_edge_list(text, Path::new("inline"))
    }

    #[test]
    fn one_based_pairs_relabel_to_zero() {
        let (g, _) = parse("1 2\n2 1\n").unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.edges(), &[(0, 1), (1, 0)]);
        assert_eq!(g.labels(), &[1, 2]);
    }

    #[test]
    fn self_loops_and_duplicates_dropped() {
        let (g, stats) = parse("% comment\n3 3\n3 4\n# other\n3 4 0.5\n").unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(stats.self_loops_dropped, 1);
        assert_eq!(stats.duplicates_dropped, 1);
    }

    #[test]
    fn matrix_market_size_line_skipped() {
        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n% c\n3 3 2\n1 2\n2 3\n";
        let (g, stats) = parse(text).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(stats.self_loops_dropped, 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse("1 2\n2 x\n") {
            Err(FgatError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse("1\n"), Err(FgatError::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_edge_set_rejected() {
        assert!(matches!(parse("% nothing\n5 5\n"), Err(FgatError::EmptyGraph)));
    }

    #[test]
    fn neighborhoods_are_closed_and_symmetric() {
        let g = Graph::from_edges(4, vec![(0, 1), (2, 1)]).unwrap();
        assert_eq!(g.neighbors(1), &[0, 1, 2]);
        assert_eq!(g.neighbors(3), &[3]);
        let m = g.message_edges();
        assert_eq!(m.len(), 2 + 3 + 2 + 1);
        assert!(m.dst.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn invalid_graphs_rejected() {
        assert!(Graph::from_edges(2, vec![(0, 2)]).is_err());
        assert!(Graph::from_edges(2, vec![(1, 1)]).is_err());
        assert!(Graph::from_edges(2, vec![(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let r = SplitRatios::default();
        assert_eq!(r.sizes(914), (639, 91, 184));
        assert_eq!(r.sizes(10), (7, 1, 2));
        assert_eq!(SplitRatios::new(0.8, 0.1, 0.1).unwrap().sizes(10), (8, 1, 1));
    }

    #[test]
    fn split_rejects_bad_ratios_and_tiny_graphs() {
        assert!(SplitRatios::new(0.7, 0.1, 0.1).is_err());
        assert!(SplitRatios::new(1.2, -0.1, -0.1).is_err());
        let g = Graph::from_edges(3, vec![(0, 1), (1, 2)]).unwrap();
        assert!(matches!(
            split_edges(&g, SplitRatios::default(), 0),
            Err(FgatError::EmptySplit(_))
        ));
    }

    #[test]
    fn split_is_deterministic() {
        let edges: Vec<Edge> = (0..10).map(|i| (i, (i + 1) % 11)).collect();
        let g = Graph::from_edges(11, edges).unwrap();
        let a = split_edges(&g, SplitRatios::default(), 7).unwrap();
        let b = split_edges(&g, SplitRatios::default(), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (7, 1, 2));
    }

    #[test]
    fn pool_size_matches_count_expression() {
        // N×(N−1)−E for N=379, E=914 distinct directed edges
        let edges: PairSet = (0..914).map(|i| (i % 379, (i / 379 + 1 + i % 379) % 379)).collect();
        assert_eq!(edges.len(), 914);
        assert_eq!(eligible_pool_size(379, &edges), 142_348);
    }

    #[test]
    fn exhaustive_sample_returns_whole_pool() {
        let excl: PairSet = [(0, 1), (2, 3)].into_iter().collect();
        let pool = eligible_pool_size(4, &excl);
        assert_eq!(pool, 10);
        let set = sample_negative_candidates(4, &excl, pool, 3).unwrap();
        let mut got = set.candidates.clone();
        got.sort_unstable();
        let mut want: Vec<Edge> = (0..4)
            .flat_map(|s| (0..4).map(move |d| (s, d)))
            .filter(|&(s, d)| s != d && !excl.contains(&(s, d)))
            .collect();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn empty_pool_is_an_error() {
        let excl: PairSet = (0..3)
            .flat_map(|s| (0..3).map(move |d| (s, d)))
            .filter(|&(s, d)| s != d)
            .collect();
        assert!(matches!(
            sample_negative_candidates(3, &excl, 1, 0),
            Err(FgatError::InsufficientPairs { available: 0, .. })
        ));
    }
}
