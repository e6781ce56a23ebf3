//! Directed communication topologies and per-round schedules.
//!
//! Graphs are dense-indexed (nodes `0..n`), stored as sorted in-neighbor
//! lists because every consumer iterates over who a node *receives* from.
//! Self-loops are mandatory on communication graphs: a node always keeps its
//! own previous value, which is what makes the gossip matrices aperiodic.

use crate::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

/// Default number of redraws before Gilbert generation gives up on finding a
/// strongly connected sample.
pub const GILBERT_RETRY_CAP: usize = 10_000;

/// A directed graph over dense node indices `0..n_nodes`.
///
/// An edge `(src, dst)` means `src` sends to `dst`, so `src` appears in
/// `in_neighbors(dst)`. Public constructors guarantee a self-loop on every
/// node; the delay extension builds relay nodes without self-loops through a
/// crate-internal path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n_nodes: usize,
    in_neighbors: Vec<Vec<usize>>,
}

impl DirectedGraph {
    /// Builds a graph from an edge list, adding any missing self-loops.
    /// Duplicate edges collapse.
    pub fn new(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidConfig("graph needs at least one node".into()));
        }
        let mut in_neighbors = vec![Vec::new(); n_nodes];
        for &(src, dst) in edges {
            if src >= n_nodes || dst >= n_nodes {
                return Err(Error::InvalidConfig(format!(
                    "edge {src}->{dst} out of range for n={n_nodes}"
                )));
            }
            in_neighbors[dst].push(src);
        }
        for (n, nbrs) in in_neighbors.iter_mut().enumerate() {
            nbrs.push(n);
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        Ok(Self { n_nodes, in_neighbors })
    }

    /// Crate-internal constructor that takes in-neighbor lists as given, with
    /// no self-loop insertion. Lists must be sorted, deduplicated and in
    /// range; used by the delay extension for virtual relay nodes.
    pub(crate) fn from_in_neighbor_lists(in_neighbors: Vec<Vec<usize>>) -> Self {
        let n_nodes = in_neighbors.len();
        debug_assert!(in_neighbors
            .iter()
            .all(|l| l.windows(2).all(|w| w[0] < w[1]) && l.iter().all(|&m| m < n_nodes)));
        Self { n_nodes, in_neighbors }
    }

    /// Complete digraph: every ordered pair plus self-loops.
    pub fn complete(n_nodes: usize) -> Self {
        let in_neighbors = (0..n_nodes).map(|_| (0..n_nodes).collect()).collect();
        Self { n_nodes, in_neighbors }
    }

    /// The five-node strongly connected digraph used by the demos, the
    /// self-test battery, and the docs. Node 2 is the hub: it hears from
    /// three peers while nodes 0 and 4 each hear from one.
    pub fn example() -> Self {
        Self::new(5, &[(2, 3), (3, 1), (1, 2), (1, 0), (0, 2), (4, 2), (2, 4)])
            .expect("example edges are in range")
    }

    /// Directed ring `n -> (n+1) mod N` plus self-loops.
    pub fn ring(n_nodes: usize) -> Self {
        let mut edges: Vec<(usize, usize)> = (0..n_nodes).map(|n| (n, (n + 1) % n_nodes)).collect();
        edges.extend((0..n_nodes).map(|n| (n, n)));
        Self::new(n_nodes, &edges).expect("ring edges are in range")
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Sorted list of nodes that `node` receives from (includes `node` itself
    /// on all public-constructed graphs).
    pub fn in_neighbors(&self, node: usize) -> &[usize] {
        &self.in_neighbors[node]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_neighbors[node].len()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.in_neighbors[dst].binary_search(&src).is_ok()
    }

    /// All edges as `(src, dst)`, ordered by destination then source.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (dst, nbrs) in self.in_neighbors.iter().enumerate() {
            for &src in nbrs {
                out.push((src, dst));
            }
        }
        out
    }

    /// Number of edges excluding self-loops.
    pub fn non_self_edge_count(&self) -> usize {
        self.in_neighbors
            .iter()
            .enumerate()
            .map(|(n, nbrs)| nbrs.iter().filter(|&&m| m != n).count())
            .sum()
    }

    fn out_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_nodes];
        for (dst, nbrs) in self.in_neighbors.iter().enumerate() {
            for &src in nbrs {
                out[src].push(dst);
            }
        }
        out
    }

    /// Two-pass reachability: node 0 must reach every node along out-edges
    /// and along in-edges.
    pub fn is_strongly_connected(&self) -> bool {
        fn all_reached(adj: &[Vec<usize>]) -> bool {
            let mut seen = vec![false; adj.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            while let Some(n) = stack.pop() {
                for &m in &adj[n] {
                    if !seen[m] {
                        seen[m] = true;
                        count += 1;
                        stack.push(m);
                    }
                }
            }
            count == adj.len()
        }
        all_reached(&self.in_neighbors) && all_reached(&self.out_neighbors())
    }

    /// Serializes as plain text: first line `N`, then one `src dst` pair per
    /// line (self-loops included), node indices zero-based.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.n_nodes);
        for (src, dst) in self.edges() {
            let _ = writeln!(s, "{src} {dst}");
        }
        s
    }

    /// Parses the `to_edge_list` format. Missing self-loops are added, since
    /// every communication graph carries them.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (line_no, first) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, msg: "empty edge list".into() })?;
        let n_nodes: usize = first.trim().parse().map_err(|_| Error::Parse {
            line: line_no + 1,
            msg: format!("expected node count, got {first:?}"),
        })?;
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>, idx: usize| -> Result<usize> {
                tok.ok_or_else(|| Error::Parse { line: idx + 1, msg: "expected 'src dst'".into() })?
                    .parse()
                    .map_err(|_| Error::Parse { line: idx + 1, msg: format!("bad node index in {line:?}") })
            };
            let src = parse(parts.next(), idx)?;
            let dst = parse(parts.next(), idx)?;
            if parts.next().is_some() {
                return Err(Error::Parse { line: idx + 1, msg: format!("trailing tokens in {line:?}") });
            }
            edges.push((src, dst));
        }
        Self::new(n_nodes, &edges)
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        Self::from_edge_list(&std::fs::read_to_string(path)?)
    }
}

/// Gilbert random digraph G(n, p): every ordered non-self pair is an edge
/// independently with probability `p`, self-loops always present. Redraws
/// until the sample is strongly connected, consuming `rng` across attempts,
/// and gives up after `retry_cap` draws.
pub fn gilbert_graph(
    n_nodes: usize,
    p: f64,
    rng: &mut impl Rng,
    retry_cap: usize,
) -> Result<DirectedGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("edge probability {p} outside [0, 1]")));
    }
    if n_nodes == 0 {
        return Err(Error::InvalidConfig("graph needs at least one node".into()));
    }
    for _ in 0..retry_cap {
        let mut in_neighbors: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for src in 0..n_nodes {
            for dst in 0..n_nodes {
                if src != dst && rng.gen::<f64>() < p {
                    in_neighbors[dst].push(src);
                }
            }
        }
        for (n, nbrs) in in_neighbors.iter_mut().enumerate() {
            nbrs.push(n);
            nbrs.sort_unstable();
        }
        let g = DirectedGraph { n_nodes, in_neighbors };
        if g.is_strongly_connected() {
            return Ok(g);
        }
    }
    Err(Error::GilbertRetriesExhausted { n: n_nodes, p, attempts: retry_cap })
}

/// How the communication graph evolves over rounds.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleMode {
    /// Same graph every round.
    Static,
    /// Every non-self edge of the base graph fails independently with
    /// probability `p_err` each round. Self-loops never fail.
    EdgeDrop { p_err: f64 },
    /// Base graph on rounds `k % period == 0`, self-loops only otherwise
    /// (nodes take local steps between communication rounds).
    LocalSteps { period: u64 },
}

/// A time-varying topology: a base graph, an evolution mode, and a seed that
/// makes every round's graph a pure function of `(schedule, k)`.
#[derive(Debug, Clone)]
pub struct GraphSchedule {
    pub base: DirectedGraph,
    pub mode: ScheduleMode,
    pub seed: u64,
}

impl GraphSchedule {
    pub fn new(base: DirectedGraph, mode: ScheduleMode, seed: u64) -> Result<Self> {
        match mode {
            ScheduleMode::EdgeDrop { p_err } if !(0.0..=1.0).contains(&p_err) => {
                Err(Error::InvalidConfig(format!("p_err {p_err} outside [0, 1]")))
            }
            ScheduleMode::LocalSteps { period: 0 } => {
                Err(Error::InvalidConfig("local-steps period must be at least 1".into()))
            }
            _ => Ok(Self { base, mode, seed }),
        }
    }

    pub fn is_static(&self) -> bool {
        match self.mode {
            ScheduleMode::Static => true,
            ScheduleMode::EdgeDrop { p_err } => p_err == 0.0,
            ScheduleMode::LocalSteps { period } => period == 1,
        }
    }

    /// The realized graph at round `k`. Deterministic: the round's randomness
    /// is stream `k` of the schedule seed, so calls commute and repeat.
    pub fn round_graph(&self, k: u64) -> DirectedGraph {
        match self.mode {
            ScheduleMode::Static => self.base.clone(),
            ScheduleMode::LocalSteps { period } => {
                if k % period == 0 {
                    self.base.clone()
                } else {
                    let loops: Vec<Vec<usize>> = (0..self.base.n_nodes()).map(|n| vec![n]).collect();
                    DirectedGraph::from_in_neighbor_lists(loops)
                }
            }
            ScheduleMode::EdgeDrop { p_err } => {
                if p_err == 0.0 {
                    return self.base.clone();
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(k);
                let n = self.base.n_nodes();
                let mut in_neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
                // Iterate in (dst, src) order so the draw sequence is fixed.
                for dst in 0..n {
                    for &src in self.base.in_neighbors(dst) {
                        if src == dst || rng.gen::<f64>() >= p_err {
                            in_neighbors[dst].push(src);
                        }
                    }
                }
                DirectedGraph::from_in_neighbor_lists(in_neighbors)
            }
        }
    }
}
