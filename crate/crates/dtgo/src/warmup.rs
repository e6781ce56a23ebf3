//! Decentralized warm-up: nodes discover the network size and their own
//! stationary influence by gossiping mass dictionaries.
//!
//! Every node starts with the dictionary `{own_id: 1}` and repeatedly
//! replaces it with the weighted sum of its in-neighbors' dictionaries,
//! treating absent keys as zero mass. The dictionary rows follow the matrix
//! powers exactly, so each entry converges to the sender's stationary weight
//! and the key count converges to the number of participating nodes. From
//! `pi_self` and the key count a node computes the influence correction it
//! applies to its local gradients during optimization.
//!
//! Virtual relay nodes forward dictionaries like any other state. Whether
//! they inject their own identifiers is configurable: with
//! `virtual_ids_visible` the key count converges to the extended size and
//! corrections normalize by it; without, relays stay anonymous, the key
//! count is the real-node count, and the corrections match the diagonal the
//! descent analysis uses. Both variants are exercised by the tests.

use crate::gossip::{GossipMatrix, Topology};
use crate::stream::{rng_for, StreamKind};
use crate::{Error, Result};
use nalgebra::DVector;
use rand::Rng;
use std::collections::BTreeMap;

/// Masses below this are flushed to exact zero so key sets stay meaningful.
pub const MASS_FLUSH: f64 = 1e-300;
/// A node's own stationary estimate must exceed this to invert safely.
pub const PI_SELF_FLOOR: f64 = 1e-14;

/// A gossiped mass dictionary keyed by opaque 128-bit node identifiers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WarmupDictionary(pub BTreeMap<u128, f64>);

impl WarmupDictionary {
    /// The protocol's initial state: all mass on the node's own identifier.
    pub fn singleton(id: u128) -> Self {
        let mut map = BTreeMap::new();
        map.insert(id, 1.0);
        Self(map)
    }

    pub fn key_count(&self) -> usize {
        self.0.len()
    }

    pub fn mass(&self, id: u128) -> Option<f64> {
        self.0.get(&id).copied()
    }

    pub fn total_mass(&self) -> f64 {
        self.0.values().sum()
    }
}

/// Deterministic 128-bit identifier for a node, drawn from its own stream of
/// the id seed. Collisions are vanishingly unlikely and not recovered from.
pub fn generate_node_id(id_seed: u64, node: usize) -> u128 {
    rng_for(id_seed, StreamKind::NodeId, node as u64).gen::<u128>()
}

/// One synchronous gossip round over dictionaries: node `n`'s next dictionary
/// is the `W[n][m]`-weighted sum of its in-neighbors' dictionaries, missing
/// keys contributing zero.
pub fn warmup_round(dicts: &[WarmupDictionary], m: &GossipMatrix) -> Vec<WarmupDictionary> {
    let n = m.n_nodes();
    assert_eq!(dicts.len(), n, "one dictionary per node");
    let w = m.weights();
    let mut next = Vec::with_capacity(n);
    for dst in 0..n {
        let mut acc: BTreeMap<u128, f64> = BTreeMap::new();
        for &src in m.graph().in_neighbors(dst) {
            let weight = w[(dst, src)];
            for (&id, &mass) in &dicts[src].0 {
                *acc.entry(id).or_insert(0.0) += weight * mass;
            }
        }
        acc.retain(|_, mass| mass.abs() >= MASS_FLUSH);
        next.push(WarmupDictionary(acc));
    }
    next
}

/// What a node reads off its dictionary at the end of warm-up.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmupResult {
    /// Number of distinct identifiers seen: the node's estimate of the
    /// network size.
    pub n_estimated: usize,
    /// Mass on the node's own identifier: its stationary weight estimate.
    pub pi_self: f64,
    /// Influence correction `1 / (n_estimated * pi_self)`.
    pub correction: f64,
    pub rounds_used: usize,
}

/// Reads the size estimate, stationary self-weight, and correction off a
/// final dictionary. Fails when the node's own mass is missing or too small
/// to invert.
pub fn finalize_warmup(
    node: usize,
    dict: &WarmupDictionary,
    own_id: u128,
    rounds_used: usize,
) -> Result<WarmupResult> {
    let pi_self = dict.mass(own_id).ok_or_else(|| Error::WarmupFailed {
        node,
        reason: "own identifier absent from final dictionary".into(),
    })?;
    if pi_self < PI_SELF_FLOOR {
        return Err(Error::WarmupFailed {
            node,
            reason: format!("pi_self {pi_self:.3e} below invertible floor"),
        });
    }
    let n_estimated = dict.key_count();
    Ok(WarmupResult {
        n_estimated,
        pi_self,
        correction: 1.0 / (n_estimated as f64 * pi_self),
        rounds_used,
    })
}

#[derive(Debug, Clone)]
pub struct WarmupConfig {
    pub rounds: usize,
    /// Whether virtual relays inject their own identifiers into the
    /// dictionaries they forward.
    pub virtual_ids_visible: bool,
    /// Emit a trace row for every real node each `stride` rounds.
    pub trace_stride: Option<usize>,
}

impl WarmupConfig {
    pub fn new(rounds: usize) -> Self {
        Self { rounds, virtual_ids_visible: true, trace_stride: None }
    }

    pub fn hidden_relays(rounds: usize) -> Self {
        Self { rounds, virtual_ids_visible: false, trace_stride: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmupTraceRow {
    pub round: usize,
    pub node: usize,
    pub key_count: usize,
    pub pi_self: f64,
}

/// Everything the warm-up phase produces.
#[derive(Debug, Clone)]
pub struct WarmupOutcome {
    /// Per real node, what it read off its own dictionary.
    pub results: Vec<WarmupResult>,
    /// Per-node multiplier for the optimization phase, all nodes; relay
    /// entries are fixed to 1.
    pub corrections: DVector<f64>,
    /// Node identifiers, all nodes.
    pub ids: Vec<u128>,
    /// Simulator-side stationary weighting measured from the same rounds:
    /// the mean row of the accumulated round-matrix product. For a static
    /// topology this is the power limit's row; for a time-varying one it is
    /// the realized product limit.
    pub stationary: DVector<f64>,
    pub trace: Vec<WarmupTraceRow>,
    /// Final dictionaries, all nodes (relay dictionaries included).
    pub dicts: Vec<WarmupDictionary>,
}

impl WarmupOutcome {
    /// How many gossip rounds the warm-up consumed; time-varying schedules
    /// resume after them.
    pub fn rounds_used(&self) -> usize {
        self.results.first().map_or(0, |r| r.rounds_used)
    }
}

/// Runs the warm-up phase synchronously for every node of the topology,
/// relays included, over rounds `0..cfg.rounds` of the schedule.
///
/// Internally the dictionaries are tracked densely by node slot (the
/// simulator knows the id table), which is exactly the dictionary protocol
/// with the key hashing stripped away; `warmup_round` is the reference
/// semantics and the equivalence is pinned by tests.
pub fn run_warmup(top: &Topology, cfg: &WarmupConfig, id_seed: u64) -> Result<WarmupOutcome> {
    let n_total = top.n_total();
    let n_real = top.n_real();
    let ids: Vec<u128> = (0..n_total).map(|n| generate_node_id(id_seed, n)).collect();

    // masses[n][m]: mass node n currently holds for node m's identifier.
    // Exact zeros mean "key absent".
    let mut masses: Vec<Vec<f64>> = (0..n_total)
        .map(|n| {
            let mut row = vec![0.0; n_total];
            if n < n_real || cfg.virtual_ids_visible {
                row[n] = 1.0;
            }
            row
        })
        .collect();
    // Product of the realized round matrices, for the simulator-side
    // stationary weighting. Tracked the same way, seeded with every slot.
    let mut product: Vec<Vec<f64>> = (0..n_total)
        .map(|n| {
            let mut row = vec![0.0; n_total];
            row[n] = 1.0;
            row
        })
        .collect();

    let mut trace = Vec::new();
    let record = |round: usize, masses: &[Vec<f64>], trace: &mut Vec<WarmupTraceRow>| {
        for node in 0..n_real {
            trace.push(WarmupTraceRow {
                round,
                node,
                key_count: masses[node].iter().filter(|&&v| v != 0.0).count(),
                pi_self: masses[node][node],
            });
        }
    };
    if let Some(stride) = cfg.trace_stride {
        if stride == 0 {
            return Err(Error::InvalidConfig("trace stride must be positive".into()));
        }
        record(0, &masses, &mut trace);
    }

    for k in 0..cfg.rounds {
        let m = top.round_matrix(k as u64);
        masses = dense_round(&masses, &m);
        product = dense_round(&product, &m);
        if let Some(stride) = cfg.trace_stride {
            if (k + 1) % stride == 0 {
                record(k + 1, &masses, &mut trace);
            }
        }
    }

    let dicts: Vec<WarmupDictionary> = masses
        .iter()
        .map(|row| {
            WarmupDictionary(
                row.iter()
                    .enumerate()
                    .filter(|&(_, &v)| v != 0.0)
                    .map(|(m, &v)| (ids[m], v))
                    .collect(),
            )
        })
        .collect();

    let mut results = Vec::with_capacity(n_real);
    let mut corrections = DVector::from_element(n_total, 1.0);
    for node in 0..n_real {
        let r = finalize_warmup(node, &dicts[node], ids[node], cfg.rounds)?;
        corrections[node] = r.correction;
        results.push(r);
    }

    let stationary = DVector::from_fn(n_total, |col, _| {
        (0..n_total).map(|row| product[row][col]).sum::<f64>() / n_total as f64
    });

    Ok(WarmupOutcome { results, corrections, ids, stationary, trace, dicts })
}

/// One dense round: `next[n] = sum over in-neighbors m of W[n][m] * cur[m]`,
/// accumulated per destination in ascending sender order, matching the
/// dictionary merge exactly.
fn dense_round(cur: &[Vec<f64>], m: &GossipMatrix) -> Vec<Vec<f64>> {
    let n = m.n_nodes();
    let width = cur[0].len();
    let w = m.weights();
    let mut next = vec![vec![0.0f64; width]; n];
    for dst in 0..n {
        let row = &mut next[dst];
        for &src in m.graph().in_neighbors(dst) {
            let weight = w[(dst, src)];
            let from = &cur[src];
            for (slot, value) in row.iter_mut().zip(from.iter()) {
                *slot += weight * value;
            }
        }
        for slot in row.iter_mut() {
            if slot.abs() < MASS_FLUSH {
                *slot = 0.0;
            }
        }
    }
    next
}

/// Serializes a warm-up trace as CSV.
pub fn write_warmup_trace_csv(rows: &[WarmupTraceRow], path: &std::path::Path) -> Result<()> {
    let mut out = String::from("round,node,key_count,pi_self\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.round, r.node, r.key_count, r.pi_self));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gossip::{extend_with_delays, inverse_indegree_matrix, perron_limit, DelayMap};
    use crate::graph::DirectedGraph;
    use crate::testkit::{demo_graph, DEMO_PI, DEMO_PI_DELAY2};

    fn demo_topology() -> Topology {
        Topology::from_matrix(inverse_indegree_matrix(&demo_graph()))
    }

    fn delayed_demo_topology() -> Topology {
        let m = inverse_indegree_matrix(&demo_graph());
        let mut delays = DelayMap::new();
        delays.insert((3, 1), 2);
        Topology::from_delayed(&extend_with_delays(&m, &delays).unwrap())
    }

    #[test]
    fn node_ids_deterministic_and_distinct() {
        let a = generate_node_id(7, 3);
        let b = generate_node_id(7, 3);
        assert_eq!(a, b);
        let ids: Vec<u128> = (0..100).map(|n| generate_node_id(7, n)).collect();
        let mut dedup = ids.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 100);
    }

    #[test]
    fn single_node_round_is_identity() {
        let g = DirectedGraph::new(1, &[]).unwrap();
        let m = inverse_indegree_matrix(&g);
        let dicts = vec![WarmupDictionary::singleton(42)];
        let next = warmup_round(&dicts, &m);
        assert_eq!(next, dicts);
    }

    #[test]
    fn two_node_symmetric_round_splits_mass() {
        let g = DirectedGraph::new(2, &[(0, 1), (1, 0)]).unwrap();
        let m = inverse_indegree_matrix(&g);
        let dicts = vec![WarmupDictionary::singleton(10), WarmupDictionary::singleton(20)];
        let next = warmup_round(&dicts, &m);
        for d in &next {
            assert_eq!(d.key_count(), 2);
            assert_eq!(d.mass(10), Some(0.5));
            assert_eq!(d.mass(20), Some(0.5));
        }
    }

    #[test]
    fn mass_is_conserved_globally() {
        // Column sums of the matrix powers track total mass; with a
        // row-stochastic matrix the global total stays the node count.
        let m = inverse_indegree_matrix(&demo_graph());
        let mut dicts: Vec<WarmupDictionary> =
            (0..5).map(|n| WarmupDictionary::singleton(n as u128)).collect();
        for _ in 0..20 {
            dicts = warmup_round(&dicts, &m);
        }
        let total: f64 = dicts.iter().map(|d| d.total_mass()).sum();
        assert!((total - 5.0).abs() < 1e-12);
    }

    #[test]
    fn key_sets_grow_monotonically() {
        let m = inverse_indegree_matrix(&demo_graph());
        let mut dicts: Vec<WarmupDictionary> =
            (0..5).map(|n| WarmupDictionary::singleton(n as u128)).collect();
        let mut previous: Vec<usize> = dicts.iter().map(|d| d.key_count()).collect();
        for _ in 0..10 {
            dicts = warmup_round(&dicts, &m);
            let counts: Vec<usize> = dicts.iter().map(|d| d.key_count()).collect();
            for (now, before) in counts.iter().zip(&previous) {
                assert!(now >= before, "key set shrank");
            }
            previous = counts;
        }
        assert!(previous.iter().all(|&c| c == 5));
    }

    #[test]
    fn finalize_reads_the_dictionary() {
        let d = WarmupDictionary::singleton(5);
        let r = finalize_warmup(0, &d, 5, 0).unwrap();
        assert_eq!((r.n_estimated, r.pi_self, r.correction), (1, 1.0, 1.0));

        assert!(matches!(
            finalize_warmup(3, &d, 6, 0),
            Err(Error::WarmupFailed { node: 3, .. })
        ));

        let mut tiny = BTreeMap::new();
        tiny.insert(5u128, 1e-15);
        assert!(finalize_warmup(0, &WarmupDictionary(tiny), 5, 0).is_err());
    }

    #[test]
    fn warmup_on_demo_graph_matches_spectral_oracle() {
        let top = demo_topology();
        let out = run_warmup(&top, &WarmupConfig::new(256), 11).unwrap();
        let summary = perron_limit(&inverse_indegree_matrix(&demo_graph())).unwrap();
        for (n, r) in out.results.iter().enumerate() {
            assert_eq!(r.n_estimated, 5);
            assert!((r.pi_self - DEMO_PI[n]).abs() < 1e-12, "node {n}: {}", r.pi_self);
            assert!((r.correction - 1.0 / (5.0 * DEMO_PI[n])).abs() < 1e-12);
            assert!((r.pi_self - summary.pi[n]).abs() < 1e-12);
        }
        // Simulator-side weighting agrees with the power limit.
        assert!((out.stationary - summary.pi).abs().max() < 1e-12);
    }

    #[test]
    fn warmup_with_visible_relays_counts_the_extended_network() {
        let top = delayed_demo_topology();
        let out = run_warmup(&top, &WarmupConfig::new(256), 11).unwrap();
        for (n, r) in out.results.iter().enumerate() {
            assert_eq!(r.n_estimated, 7, "relays inject their ids");
            assert!((r.pi_self - DEMO_PI_DELAY2[n]).abs() < 1e-12);
            assert!((r.correction - 1.0 / (7.0 * DEMO_PI_DELAY2[n])).abs() < 1e-12);
        }
        for v in 5..7 {
            assert_eq!(out.corrections[v], 1.0, "relay corrections are pinned to 1");
        }
    }

    #[test]
    fn warmup_with_hidden_relays_counts_real_nodes() {
        let top = delayed_demo_topology();
        let out = run_warmup(&top, &WarmupConfig::hidden_relays(256), 11).unwrap();
        for (n, r) in out.results.iter().enumerate() {
            assert_eq!(r.n_estimated, 5, "anonymous relays stay uncounted");
            assert!((r.pi_self - DEMO_PI_DELAY2[n]).abs() < 1e-12);
            assert!((r.correction - 1.0 / (5.0 * DEMO_PI_DELAY2[n])).abs() < 1e-12);
        }
        // The stationary weighting still covers the whole extended network.
        assert!((out.stationary.sum() - 1.0).abs() < 1e-10);
        assert_eq!(out.stationary.len(), 7);
    }

    #[test]
    fn zero_rounds_degenerates_to_self_knowledge() {
        let top = demo_topology();
        let out = run_warmup(&top, &WarmupConfig::new(0), 3).unwrap();
        for r in &out.results {
            assert_eq!((r.n_estimated, r.pi_self, r.correction), (1, 1.0, 1.0));
        }
    }

    #[test]
    fn dense_path_equals_dictionary_protocol() {
        let top = delayed_demo_topology();
        let cfg = WarmupConfig::new(30);
        let out = run_warmup(&top, &cfg, 5).unwrap();

        // Reference: literal dictionary rounds.
        let m = match &top {
            Topology::Static { matrix, .. } => matrix.clone(),
            _ => unreachable!(),
        };
        let ids: Vec<u128> = (0..7).map(|n| generate_node_id(5, n)).collect();
        let mut dicts: Vec<WarmupDictionary> =
            ids.iter().map(|&id| WarmupDictionary::singleton(id)).collect();
        for _ in 0..30 {
            dicts = warmup_round(&dicts, &m);
        }
        assert_eq!(out.dicts, dicts, "dense fast path must match the protocol bit for bit");
    }

    #[test]
    fn warmup_is_deterministic() {
        let top = delayed_demo_topology();
        let a = run_warmup(&top, &WarmupConfig::new(64), 9).unwrap();
        let b = run_warmup(&top, &WarmupConfig::new(64), 9).unwrap();
        assert_eq!(a.results, b.results);
        assert_eq!(a.dicts, b.dicts);
    }

    #[test]
    fn trace_records_progress() {
        let top = demo_topology();
        let mut cfg = WarmupConfig::new(8);
        cfg.trace_stride = Some(4);
        let out = run_warmup(&top, &cfg, 2).unwrap();
        // Rounds 0, 4, 8 for 5 nodes each.
        assert_eq!(out.trace.len(), 15);
        assert!(out.trace.iter().all(|r| r.round % 4 == 0));
        let final_rows: Vec<_> = out.trace.iter().filter(|r| r.round == 8).collect();
        assert!(final_rows.iter().all(|r| r.key_count == 5));
    }

    #[test]
    fn warmup_over_large_gilbert_graph_counts_everyone() {
        use crate::stream::{rng_for, StreamKind};
        let mut rng = rng_for(31, StreamKind::Graph, 0);
        let g = crate::graph::gilbert_graph(100, 0.5, &mut rng, 10_000).unwrap();
        let top = Topology::from_matrix(inverse_indegree_matrix(&g));
        let out = run_warmup(&top, &WarmupConfig::new(1024), 31).unwrap();
        let summary = perron_limit(&inverse_indegree_matrix(&g)).unwrap();
        for (n, r) in out.results.iter().enumerate() {
            assert_eq!(r.n_estimated, 100);
            assert!((r.pi_self - summary.pi[n]).abs() < 1e-10, "node {n}");
        }
    }
}
