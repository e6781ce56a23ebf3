//! Gossip weight matrices, delay extensions, and spectral analysis.
//!
//! A valid gossip matrix is row-stochastic, supported exactly on the graph's
//! edges (W[n][m] > 0 iff node n receives from m), and has a positive
//! diagonal. The natural construction weighs every in-neighbor by the
//! receiver's inverse in-degree, which a node can do knowing nothing but how
//! many messages it got.
//!
//! A delayed edge is modeled by splicing unit-weight relay nodes into the
//! graph: a delay of `l` rounds on `src -> dst` becomes the chain
//! `src -> v1 -> ... -> vl -> dst`, where the final hop inherits the weight
//! the receiver had assigned to `src`. Relay rows have a single unit entry
//! and a zero diagonal, so the extended matrix keeps row sums but not the
//! positive-diagonal clause; its powers still converge because the real
//! nodes keep their self-loops and the extension preserves strong
//! connectivity.

use crate::graph::DirectedGraph;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::path::Path;

/// Row sums may deviate from 1 by at most this much.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Repeated squaring stops once consecutive iterates agree entrywise to this.
pub const CONVERGENCE_TOL: f64 = 1e-13;
/// Entries of the stationary vector below this are treated as zero.
pub const POSITIVITY_FLOOR: f64 = 1e-14;
/// The stationary vector must sum to 1 within this.
pub const PI_SUM_TOL: f64 = 1e-10;
/// Default cap on the number of squarings in `perron_limit`.
pub const MAX_SQUARINGS: usize = 1 << 10;
/// Cap on the mixing-time search.
const MIXING_TAU_CAP: usize = 100_000;

/// Delay assignment: `(src, dst) -> rounds`. Zero entries are ignored.
pub type DelayMap = BTreeMap<(usize, usize), u32>;

/// A weight matrix paired with the graph it lives on. `weights[(n, m)]` is
/// the weight receiver `n` puts on sender `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipMatrix {
    weights: DMatrix<f64>,
    graph: DirectedGraph,
}

impl GossipMatrix {
    /// Validates all three gossip-matrix clauses before accepting.
    pub fn new(weights: DMatrix<f64>, graph: DirectedGraph) -> Result<Self> {
        let m = Self { weights, graph };
        let report = validate_gossip_matrix(&m);
        if report.is_valid() {
            Ok(m)
        } else {
            Err(Error::InvalidConfig(format!("invalid gossip matrix: {report}")))
        }
    }

    /// Crate-internal path for delay-extended matrices, whose relay rows have
    /// zero diagonals by construction.
    pub(crate) fn from_parts_unchecked(weights: DMatrix<f64>, graph: DirectedGraph) -> Self {
        Self { weights, graph }
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }
}

/// Weighs each in-neighbor of node `n` (itself included) by
/// `1 / in_degree(n)`. Always yields a valid gossip matrix.
pub fn inverse_indegree_matrix(graph: &DirectedGraph) -> GossipMatrix {
    let n = graph.n_nodes();
    let mut weights = DMatrix::zeros(n, n);
    for dst in 0..n {
        let w = 1.0 / graph.in_degree(dst) as f64;
        for &src in graph.in_neighbors(dst) {
            weights[(dst, src)] = w;
        }
    }
    GossipMatrix::from_parts_unchecked(weights, graph.clone())
}

/// Per-clause validation outcome for a gossip matrix.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    /// Largest `|row_sum - 1|` over all rows.
    pub max_row_sum_err: f64,
    /// Entries violating "positive iff edge present", as `(row, col)`.
    pub support_mismatches: Vec<(usize, usize)>,
    /// Rows whose diagonal entry is not positive.
    pub nonpositive_diagonal: Vec<usize>,
}

impl ValidationReport {
    pub fn row_stochastic(&self) -> bool {
        self.max_row_sum_err <= ROW_SUM_TOL
    }

    pub fn support_matches(&self) -> bool {
        self.support_mismatches.is_empty()
    }

    pub fn positive_diagonal(&self) -> bool {
        self.nonpositive_diagonal.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.row_stochastic() && self.support_matches() && self.positive_diagonal()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "row sums {} (max err {:.3e}), support {} ({} mismatches), diagonal {} ({} nonpositive)",
            if self.row_stochastic() { "ok" } else { "BAD" },
            self.max_row_sum_err,
            if self.support_matches() { "ok" } else { "BAD" },
            self.support_mismatches.len(),
            if self.positive_diagonal() { "ok" } else { "BAD" },
            self.nonpositive_diagonal.len(),
        )
    }
}

/// Checks the three clauses of a valid gossip matrix against its graph.
pub fn validate_gossip_matrix(m: &GossipMatrix) -> ValidationReport {
    let n = m.n_nodes();
    let w = &m.weights;
    let mut report = ValidationReport::default();
    for row in 0..n {
        let sum: f64 = (0..n).map(|col| w[(row, col)]).sum();
        report.max_row_sum_err = report.max_row_sum_err.max((sum - 1.0).abs());
        for col in 0..n {
            let entry = w[(row, col)];
            let edge = m.graph.has_edge(col, row);
            if entry < 0.0 || (entry > 0.0) != edge {
                report.support_mismatches.push((row, col));
            }
        }
        if w[(row, row)] <= 0.0 {
            report.nonpositive_diagonal.push(row);
        }
    }
    report
}

/// A gossip matrix extended with virtual relay chains for delayed edges.
/// Real nodes keep indices `0..n_real()`; relays follow.
#[derive(Debug, Clone)]
pub struct DelayedNetwork {
    pub original: GossipMatrix,
    /// The nonzero delays actually applied.
    pub delays: DelayMap,
    pub extended: GossipMatrix,
    pub is_virtual: Vec<bool>,
}

impl DelayedNetwork {
    pub fn n_real(&self) -> usize {
        self.original.n_nodes()
    }

    pub fn n_total(&self) -> usize {
        self.extended.n_nodes()
    }
}

/// Splices relay chains into `original` per the delay map. Delays of zero are
/// ignored; a delayed edge must exist and must not be a self-loop. Relay
/// chains are appended in the map's `(src, dst)` order, so the layout is
/// deterministic.
pub fn extend_with_delays(original: &GossipMatrix, delays: &DelayMap) -> Result<DelayedNetwork> {
    let n = original.n_nodes();
    let mut applied = DelayMap::new();
    for (&(src, dst), &ell) in delays {
        if ell == 0 {
            continue;
        }
        if src >= n || dst >= n {
            return Err(Error::InvalidConfig(format!(
                "delayed edge {src}->{dst} out of range for n={n}"
            )));
        }
        if src == dst {
            return Err(Error::DelayedSelfLoop { node: src });
        }
        if !original.graph().has_edge(src, dst) {
            return Err(Error::DelayedEdgeMissing { src, dst });
        }
        applied.insert((src, dst), ell);
    }

    let extra: usize = applied.values().map(|&l| l as usize).sum();
    let total = n + extra;
    let mut weights = DMatrix::zeros(total, total);
    weights.view_mut((0, 0), (n, n)).copy_from(original.weights());

    let mut next_virtual = n;
    for (&(src, dst), &ell) in &applied {
        let moved = weights[(dst, src)];
        weights[(dst, src)] = 0.0;
        let mut prev = src;
        for _ in 0..ell {
            weights[(next_virtual, prev)] = 1.0;
            prev = next_virtual;
            next_virtual += 1;
        }
        weights[(dst, prev)] = moved;
    }

    let mut in_neighbors: Vec<Vec<usize>> = vec![Vec::new(); total];
    for row in 0..total {
        for col in 0..total {
            if weights[(row, col)] > 0.0 {
                in_neighbors[row].push(col);
            }
        }
    }
    let graph = DirectedGraph::from_in_neighbor_lists(in_neighbors);
    let mut is_virtual = vec![false; total];
    for flag in is_virtual.iter_mut().skip(n) {
        *flag = true;
    }

    Ok(DelayedNetwork {
        original: original.clone(),
        delays: applied,
        extended: GossipMatrix::from_parts_unchecked(weights, graph),
        is_virtual,
    })
}

/// Spectral description of a gossip matrix: the power limit `W^inf`, its
/// common row `pi`, the geometric contraction rate, and the measured mixing
/// time.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Common row of the power limit; sums to 1.
    pub pi: DVector<f64>,
    /// Squared modulus of the second-largest eigenvalue; the squared spectral
    /// norm of `W^k - W^inf` contracts geometrically at this rate.
    pub rho: f64,
    /// Smallest `k >= 1` with `||W^k - W^inf||_2^2 < 1`.
    pub mixing_tau: usize,
    /// The converged power limit.
    pub w_inf: DMatrix<f64>,
}

/// Computes the power limit by repeated squaring (stops when consecutive
/// squarings agree entrywise below `CONVERGENCE_TOL`), then reads off the
/// stationary vector and the contraction rate. Requires a valid gossip
/// matrix, possibly delay-extended; a matrix whose limit is not rank-one
/// (e.g. a disconnected graph) is reported as an error.
pub fn perron_limit(m: &GossipMatrix) -> Result<SpectralSummary> {
    perron_limit_with_cap(m, MAX_SQUARINGS)
}

pub fn perron_limit_with_cap(m: &GossipMatrix, max_squarings: usize) -> Result<SpectralSummary> {
    let n = m.n_nodes();
    let w = m.weights();
    let mut p = w.clone();
    let mut squarings = 0;
    loop {
        let q = &p * &p;
        let delta = (&q - &p).abs().max();
        p = q;
        squarings += 1;
        if delta < CONVERGENCE_TOL {
            break;
        }
        if squarings >= max_squarings {
            return Err(Error::PowerLimitDiverged { squarings, delta });
        }
    }

    // The limit must be rank one: all rows within the convergence tolerance
    // horizon of each other.
    let mut spread = 0.0f64;
    for col in 0..n {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in 0..n {
            lo = lo.min(p[(row, col)]);
            hi = hi.max(p[(row, col)]);
        }
        spread = spread.max(hi - lo);
    }
    if spread > PI_SUM_TOL {
        return Err(Error::NotStronglyConnected);
    }

    let pi = DVector::from_fn(n, |col, _| {
        (0..n).map(|row| p[(row, col)]).sum::<f64>() / n as f64
    });

    let rho = if n < 2 { 0.0 } else { second_modulus_sq(w, &p) };

    let mut mixing_tau = 0;
    let mut power = w.clone();
    let mut warm = None;
    for k in 1..=MIXING_TAU_CAP {
        let (norm_sq, vec) = spectral_norm_sq(&(&power - &p), warm);
        warm = Some(vec);
        if norm_sq < 1.0 {
            mixing_tau = k;
            break;
        }
        if k == MIXING_TAU_CAP {
            return Err(Error::MixingTimeExceeded { cap: MIXING_TAU_CAP, norm: norm_sq });
        }
        power *= w;
    }

    Ok(SpectralSummary { pi, rho, mixing_tau, w_inf: p })
}

/// Squared modulus of the second-largest eigenvalue, computed as the
/// spectral radius of the deflation `W - W^inf` (whose spectrum is the
/// spectrum of `W` with the Perron root removed) by block subspace iteration
/// with Rayleigh-Ritz extraction. A full dense QR eigensolve is not usable
/// here: relay chains make delay-extended matrices defective (nilpotent
/// blocks, high-multiplicity zero eigenvalues), which stalls it badly at a
/// few hundred nodes, while the dominant part of the deflated spectrum is
/// exactly what a small iterated block captures. The block is wide enough
/// for conjugate pairs and small clusters at the second modulus.
fn second_modulus_sq(w: &DMatrix<f64>, w_inf: &DMatrix<f64>) -> f64 {
    let n = w.nrows();
    let d = w - w_inf;
    if d.abs().max() == 0.0 {
        return 0.0;
    }
    let block = 6.min(n);
    // Deterministic start block; any fixed full-rank fill works, this one
    // just decorrelates the columns.
    let mut v = DMatrix::from_fn(n, block, |i, j| {
        let x = ((i * 2_654_435_761 + j * 40_503 + 977) % 1_000_003) as f64 / 1_000_003.0;
        x - 0.5
    });
    v = nalgebra::QR::new(v).q();
    let mut prev = f64::INFINITY;
    let mut stable = 0;
    for step in 1..=3000 {
        v = nalgebra::QR::new(&d * &v).q();
        if step % 5 == 0 {
            let dv = &d * &v;
            let h = v.transpose() * &dv;
            let top = h.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0f64, f64::max);
            if (top - prev).abs() <= 1e-13 * top.max(1e-300) {
                stable += 1;
                if stable >= 2 {
                    return top * top;
                }
            } else {
                stable = 0;
            }
            prev = top;
        }
    }
    prev * prev
}

/// Squared spectral norm (largest singular value squared) via power iteration
/// on `A^T A`, warm-startable with a previous singular vector.
pub(crate) fn spectral_norm_sq(a: &DMatrix<f64>, warm: Option<DVector<f64>>) -> (f64, DVector<f64>) {
    let n = a.ncols();
    let mut v = warm.unwrap_or_else(|| DVector::from_element(n, 1.0 / (n as f64).sqrt()));
    if v.norm() == 0.0 {
        v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    }
    let mut lambda = 0.0f64;
    for _ in 0..200 {
        let av = a * &v;
        let w = a.transpose() * av;
        let norm = w.norm();
        if norm <= f64::MIN_POSITIVE {
            return (0.0, v);
        }
        let next = w / norm;
        let est = (a * &next).norm_squared();
        if (est - lambda).abs() <= 1e-10 * est.max(1.0) {
            return (est, next);
        }
        lambda = est;
        v = next;
    }
    (lambda, v)
}

/// Measured contraction of the matrix powers toward the limit.
#[derive(Debug, Clone)]
pub struct RateTable {
    /// `||W^k - W^inf||_2^2` for `k = 1..=k_max`.
    pub norms_sq: Vec<f64>,
    /// Smallest constant with `norms_sq[k] <= c_fit * rho^k` over the
    /// measured horizon. A lower bound for any constant valid on all k.
    pub c_fit: f64,
    pub rho: f64,
}

/// Tabulates `||W^k - W^inf||_2^2` for `k <= k_max` and fits the smallest
/// constant making the geometric bound hold on that horizon.
pub fn geometric_rate_check(m: &GossipMatrix, summary: &SpectralSummary, k_max: usize) -> RateTable {
    let w = m.weights();
    let mut norms_sq = Vec::with_capacity(k_max);
    let mut power = w.clone();
    let mut warm = None;
    for _ in 1..=k_max {
        let (norm_sq, vec) = spectral_norm_sq(&(&power - &summary.w_inf), warm);
        warm = Some(vec);
        norms_sq.push(norm_sq);
        power *= w;
    }
    let mut c_fit = 0.0f64;
    if summary.rho > 0.0 {
        let mut rho_k = 1.0;
        for (idx, &ns) in norms_sq.iter().enumerate() {
            rho_k *= summary.rho;
            if ns > 0.0 {
                c_fit = c_fit.max(ns / rho_k);
            }
            let _ = idx;
        }
    }
    RateTable { norms_sq, c_fit, rho: summary.rho }
}

/// What couples the nodes at each round: either one fixed matrix (possibly
/// delay-extended, with relay nodes after the real ones) or a per-round
/// matrix realized from a graph schedule with inverse in-degree weights.
#[derive(Debug, Clone)]
pub enum Topology {
    Static { matrix: GossipMatrix, n_real: usize },
    Varying { schedule: crate::graph::GraphSchedule },
}

impl Topology {
    pub fn from_matrix(matrix: GossipMatrix) -> Self {
        let n_real = matrix.n_nodes();
        Topology::Static { matrix, n_real }
    }

    pub fn from_delayed(net: &DelayedNetwork) -> Self {
        Topology::Static { matrix: net.extended.clone(), n_real: net.n_real() }
    }

    pub fn from_schedule(schedule: crate::graph::GraphSchedule) -> Self {
        Topology::Varying { schedule }
    }

    pub fn n_total(&self) -> usize {
        match self {
            Topology::Static { matrix, .. } => matrix.n_nodes(),
            Topology::Varying { schedule } => schedule.base.n_nodes(),
        }
    }

    pub fn n_real(&self) -> usize {
        match self {
            Topology::Static { n_real, .. } => *n_real,
            Topology::Varying { schedule } => schedule.base.n_nodes(),
        }
    }

    pub fn is_virtual(&self, node: usize) -> bool {
        node >= self.n_real()
    }

    pub fn is_static(&self) -> bool {
        match self {
            Topology::Static { .. } => true,
            Topology::Varying { schedule } => schedule.is_static(),
        }
    }

    /// The coupling matrix in force at round `k`.
    pub fn round_matrix(&self, k: u64) -> std::borrow::Cow<'_, GossipMatrix> {
        match self {
            Topology::Static { matrix, .. } => std::borrow::Cow::Borrowed(matrix),
            Topology::Varying { schedule } => {
                std::borrow::Cow::Owned(inverse_indegree_matrix(&schedule.round_graph(k)))
            }
        }
    }
}

/// Writes a matrix as CSV, one row per line, entries in the shortest
/// representation that parses back to the identical float.
pub fn write_matrix_csv(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut out = String::new();
    for row in 0..m.nrows() {
        let cells: Vec<String> = (0..m.ncols()).map(|col| format!("{}", m[(row, col)])).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|cell| cell.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::Parse { line: idx + 1, msg: e.to_string() })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse { line: idx + 1, msg: "ragged row".into() });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, msg: "empty matrix".into() });
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}
