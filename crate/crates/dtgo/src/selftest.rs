//! Runtime invariant battery behind the `selftest` subcommand: quick
//! end-to-end checks of the load-bearing properties, runnable on any
//! installed binary without the test harness.

use crate::gossip::{
    extend_with_delays, inverse_indegree_matrix, perron_limit, validate_gossip_matrix, DelayMap,
    Topology,
};
use crate::graph::DirectedGraph;
use crate::metrics::RunTrace;
use crate::objective::{synthetic_classification, NodeObjective};
use crate::optim::{
    centralized_sgd, corrected_gossip_demo, run_dtgo, Baseline, OptimizerConfig,
};
use crate::stream::{rng_for, StreamKind};
use crate::warmup::{run_warmup, WarmupConfig};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

type Check = (&'static str, fn() -> Result<(), String>);

fn fail(msg: String) -> Result<(), String> {
    Err(msg)
}

fn example_weights() -> crate::gossip::GossipMatrix {
    inverse_indegree_matrix(&DirectedGraph::example())
}

fn weights_validate() -> Result<(), String> {
    let report = validate_gossip_matrix(&example_weights());
    if report.is_valid() {
        Ok(())
    } else {
        fail(format!("example weights rejected: {report:?}"))
    }
}

fn power_limit_is_rank_one() -> Result<(), String> {
    let s = perron_limit(&example_weights()).map_err(|e| e.to_string())?;
    let sum: f64 = s.pi.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return fail(format!("stationary weights sum to {sum}"));
    }
    if s.pi.iter().any(|&p| p <= 0.0) {
        return fail(format!("nonpositive stationary weight in {:?}", s.pi));
    }
    for r in 0..s.w_inf.nrows() {
        for c in 0..s.w_inf.ncols() {
            if (s.w_inf[(r, c)] - s.pi[c]).abs() > 1e-10 {
                return fail(format!("limit row {r} disagrees with pi at column {c}"));
            }
        }
    }
    Ok(())
}

fn delay_extension_stays_stochastic() -> Result<(), String> {
    let mut delays = DelayMap::new();
    delays.insert((4, 2), 2);
    let net = extend_with_delays(&example_weights(), &delays).map_err(|e| e.to_string())?;
    let report = validate_gossip_matrix(&net.extended);
    if report.max_row_sum_err > 1e-12 || !report.support_mismatches.is_empty() {
        return fail(format!("extended matrix rejected: {report:?}"));
    }
    // Relay rows hold a single off-diagonal unit entry, so only virtual
    // indices may trip the positive-diagonal clause.
    if report.nonpositive_diagonal.iter().any(|&n| !net.is_virtual[n]) {
        return fail(format!("a real node lost its self-weight: {report:?}"));
    }
    let s = perron_limit(&net.extended).map_err(|e| e.to_string())?;
    let sum: f64 = s.pi.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return fail(format!("extended stationary weights sum to {sum}"));
    }
    Ok(())
}

fn warmup_counts_every_node() -> Result<(), String> {
    let top = Topology::from_matrix(example_weights());
    let warmup =
        run_warmup(&top, &WarmupConfig::new(256), 2024).map_err(|e| e.to_string())?;
    let pi = perron_limit(&example_weights()).map_err(|e| e.to_string())?.pi;
    for (n, r) in warmup.results.iter().enumerate() {
        if r.n_estimated != 5 {
            return fail(format!("node {n} counted {} nodes", r.n_estimated));
        }
        let product = warmup.corrections[n] * pi[n] * 5.0;
        if (product - 1.0).abs() > 1e-8 {
            return fail(format!("node {n}: correction * pi * N = {product}"));
        }
    }
    Ok(())
}

fn corrected_gossip_recovers_the_mean() -> Result<(), String> {
    let w = example_weights();
    let mut rng = rng_for(2024, StreamKind::Demo, 0);
    let initial =
        DVector::from_fn(5, |_, _| 5f64.sqrt() * rng.sample::<f64, _>(StandardNormal));
    let trace = corrected_gossip_demo(&w, &initial, 300).map_err(|e| e.to_string())?;
    let mean = initial.mean();
    let weighted = trace.pi.dot(&initial);
    let last_plain = trace.plain.last().unwrap();
    let last_corrected = trace.corrected.last().unwrap();
    for n in 0..5 {
        if (last_corrected[n] - mean).abs() > 1e-8 {
            return fail(format!("corrected node {n} ended at {} vs mean {mean}", last_corrected[n]));
        }
        if (last_plain[n] - weighted).abs() > 1e-8 {
            return fail(format!("plain node {n} ended at {} vs {weighted}", last_plain[n]));
        }
    }
    if (mean - weighted).abs() < 1e-6 {
        return fail("demo initials make the two limits coincide".into());
    }
    Ok(())
}

fn quadratic_objectives(n: usize, dim: usize, noise_std: f64, seed: u64) -> Vec<NodeObjective> {
    (0..n)
        .map(|node| {
            let mut rng = rng_for(seed, StreamKind::Objective, node as u64);
            let center = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            NodeObjective::quadratic_noisy(center, noise_std)
        })
        .collect()
}

fn complete_graph_tracks_centralized() -> Result<(), String> {
    let top = Topology::from_matrix(inverse_indegree_matrix(&DirectedGraph::complete(6)));
    let objectives = quadratic_objectives(6, 3, 0.5, 7);
    let warmup = run_warmup(&top, &WarmupConfig::new(128), 7).map_err(|e| e.to_string())?;
    let mut cfg = OptimizerConfig::new(0.1, 80, 7).map_err(|e| e.to_string())?;
    cfg.baseline = Baseline::None;
    let run = run_dtgo(&cfg, &top, &objectives, &warmup).map_err(|e| e.to_string())?;
    let central = centralized_sgd(&cfg, &objectives).map_err(|e| e.to_string())?;
    let target = &central.models[0];
    for (n, model) in run.models.iter().enumerate() {
        let diff = (model - target).amax();
        if diff > 1e-9 {
            return fail(format!("node {n} drifted {diff} from the centralized run"));
        }
    }
    Ok(())
}

fn descent_identity_with_delays() -> Result<(), String> {
    let g = DirectedGraph::example();
    let mut delays = DelayMap::new();
    delays.insert((4, 2), 2);
    delays.insert((1, 0), 1);
    let net = extend_with_delays(&inverse_indegree_matrix(&g), &delays).map_err(|e| e.to_string())?;
    let top = Topology::from_delayed(&net);
    let objectives = quadratic_objectives(5, 3, 1.0, 13);
    let wcfg = WarmupConfig { rounds: 512, virtual_ids_visible: false, trace_stride: None };
    let warmup = run_warmup(&top, &wcfg, 13).map_err(|e| e.to_string())?;
    let mut cfg = OptimizerConfig::new(0.05, 60, 13).map_err(|e| e.to_string())?;
    cfg.baseline = Baseline::None;
    let run = run_dtgo(&cfg, &top, &objectives, &warmup).map_err(|e| e.to_string())?;
    let worst = run
        .trace
        .rows
        .iter()
        .map(|r| r.weighted_avg_drift)
        .fold(0.0f64, f64::max);
    if worst > 1e-9 {
        return fail(format!("weighted-average drift reached {worst}"));
    }
    Ok(())
}

fn logistic_gradient_matches_finite_differences() -> Result<(), String> {
    let mut rng = rng_for(5, StreamKind::Objective, 0);
    let data = Arc::new(synthetic_classification(40, 5, 0.1, &mut rng));
    let shard: Vec<usize> = (0..40).collect();
    let obj = NodeObjective::logistic(data, shard, 0.01, 0);
    let x = DVector::from_fn(5, |i, _| 0.3 * (i as f64) - 0.5);
    let g = obj.full_gradient(&x);
    let h = 1e-5 * (1.0 + x.norm());
    for i in 0..5 {
        let mut lo = x.clone();
        let mut hi = x.clone();
        lo[i] -= h;
        hi[i] += h;
        let fd = (obj.value(&hi) - obj.value(&lo)) / (2.0 * h);
        let scale = g[i].abs().max(1.0);
        if (fd - g[i]).abs() / scale > 1e-6 {
            return fail(format!("coordinate {i}: analytic {} vs finite difference {fd}", g[i]));
        }
    }
    Ok(())
}

fn trace_csv_round_trips() -> Result<(), String> {
    let top = Topology::from_matrix(example_weights());
    let objectives = quadratic_objectives(5, 2, 1.0, 3);
    let warmup = run_warmup(&top, &WarmupConfig::new(128), 3).map_err(|e| e.to_string())?;
    let cfg = OptimizerConfig::new(0.1, 25, 3).map_err(|e| e.to_string())?;
    let run = run_dtgo(&cfg, &top, &objectives, &warmup).map_err(|e| e.to_string())?;
    let text = run.trace.to_csv_string();
    let parsed = RunTrace::parse_csv(&text).map_err(|e| e.to_string())?;
    if parsed != run.trace {
        return fail("parsed trace differs from the written one".into());
    }
    Ok(())
}

fn seeded_streams_replay() -> Result<(), String> {
    let a: u64 = rng_for(99, StreamKind::Gradient, 4).gen();
    let b: u64 = rng_for(99, StreamKind::Gradient, 4).gen();
    if a != b {
        return fail("identical stream keys produced different draws".into());
    }
    let c: u64 = rng_for(99, StreamKind::Graph, 4).gen();
    if a == c {
        return fail("distinct purposes shared a stream".into());
    }
    Ok(())
}

/// Every check in dependency order, cheapest first. Names are stable: the
/// CLI prints them verbatim.
pub fn battery() -> Vec<Check> {
    vec![
        ("seeded streams replay", seeded_streams_replay),
        ("example weights validate", weights_validate),
        ("power limit is rank one", power_limit_is_rank_one),
        ("delay extension stays stochastic", delay_extension_stays_stochastic),
        ("warm-up counts every node", warmup_counts_every_node),
        ("corrected gossip recovers the mean", corrected_gossip_recovers_the_mean),
        ("complete graph tracks centralized SGD", complete_graph_tracks_centralized),
        ("descent identity holds with delays", descent_identity_with_delays),
        ("logistic gradient matches finite differences", logistic_gradient_matches_finite_differences),
        ("trace csv round-trips", trace_csv_round_trips),
    ]
}

/// Runs the whole battery, returning each check's outcome.
pub fn run_battery() -> Vec<(&'static str, Result<(), String>)> {
    battery().into_iter().map(|(name, f)| (name, f())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_is_green() {
        for (name, outcome) in run_battery() {
            assert!(outcome.is_ok(), "{name}: {:?}", outcome.unwrap_err());
        }
    }

    #[test]
    fn example_graph_matches_the_test_fixture() {
        let a = DirectedGraph::example();
        let b = crate::testkit::demo_graph();
        assert_eq!(a.edges(), b.edges(), "public example and test fixture agree");
    }
}
