//! The corrected decentralized SGD loop over a gossip topology, plus the
//! centralized-SGD and plain DSGD baselines and the corrected-gossip
//! averaging demo.
//!
//! One round per node: take a local SGD step, rescale the step by the
//! node's influence correction, broadcast, average incoming models by the
//! round's gossip weights. In matrix form a round maps the stacked models X
//! to W(X - eta*D*grad), with D carrying the warm-up corrections and unit
//! entries for relays. The rescaling makes the stationary-weighted average
//! follow plain centralized SGD on the mean gradient, which is the whole
//! mechanism; the per-round residual of that identity is tracked as
//! `weighted_avg_drift`.

use crate::gossip::{perron_limit, GossipMatrix, Topology, PI_SUM_TOL};
use crate::metrics::{compute_round_metrics, RunTrace};
use crate::objective::NodeObjective;
use crate::stream::{rng_for, StreamKind};
use crate::warmup::WarmupOutcome;
use crate::{Error, Result};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

/// Hard ceiling on model norms before a run aborts as divergent.
pub const DIVERGENCE_CAP: f64 = 1e12;

/// One node's view during optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub model: DVector<f64>,
    /// Influence correction applied to local gradient steps; 1 for relays.
    pub correction: f64,
    pub is_virtual: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Every node starts at the origin (the default).
    Zero,
    /// Real nodes draw i.i.d. normal coordinates; relays still start at zero.
    RandomNormal,
}

/// Which paired run suboptimality columns are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    None,
    Centralized,
    Dsgd,
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub rounds: usize,
    /// Master seed for gradient and initialization streams.
    pub seed: u64,
    pub init: InitMode,
    pub init_std: f64,
    pub baseline: Baseline,
    pub divergence_cap: f64,
    /// Keep every round's models in the output (memory scales with
    /// rounds * nodes * dim).
    pub record_trajectory: bool,
}

impl OptimizerConfig {
    pub fn new(step_size: f64, rounds: usize, seed: u64) -> Result<Self> {
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {step_size}")));
        }
        if rounds == 0 {
            return Err(Error::InvalidConfig("need at least one round".into()));
        }
        Ok(Self {
            step_size,
            rounds,
            seed,
            init: InitMode::Zero,
            init_std: 1.0,
            baseline: Baseline::Centralized,
            divergence_cap: DIVERGENCE_CAP,
            record_trajectory: false,
        })
    }
}

/// Exact stationary-weighted combination of the models.
pub fn weighted_average(models: &[DVector<f64>], pi: &DVector<f64>) -> DVector<f64> {
    assert_eq!(models.len(), pi.len(), "one weight per model");
    assert!((pi.sum() - 1.0).abs() < PI_SUM_TOL, "weights must sum to 1");
    let mut acc = DVector::zeros(models[0].len());
    for (x, &p) in models.iter().zip(pi.iter()) {
        acc += x * p;
    }
    acc
}

/// One synchronous round: real node n steps to z_n = x_n - (eta*d_n)*g_n
/// (algebraically x_n + d_n*(y_n - x_n) for the plain SGD step y_n), relays
/// forward z = x unchanged, then every node averages the broadcast z values
/// with its row of the round matrix, accumulating over in-neighbors in
/// ascending sender order. With corrections pinned to 1 the arithmetic is
/// operation-for-operation a textbook DSGD round.
///
/// `gradients` holds one entry per real (non-virtual) node, which occupy the
/// leading indices. Aborts with the offending round and node when a model
/// leaves the finite ball of radius `divergence_cap`.
pub fn dtgo_round(
    states: &[NodeState],
    gradients: &[DVector<f64>],
    w: &GossipMatrix,
    step_size: f64,
    round: usize,
    divergence_cap: f64,
) -> Result<Vec<NodeState>> {
    let n = states.len();
    assert_eq!(w.n_nodes(), n, "matrix size matches state count");
    let weights = w.weights();

    let z: Vec<DVector<f64>> = states
        .iter()
        .enumerate()
        .map(|(m, s)| {
            if s.is_virtual {
                s.model.clone()
            } else {
                &s.model - &gradients[m] * (step_size * s.correction)
            }
        })
        .collect();

    let mut next = Vec::with_capacity(n);
    for (dst, state) in states.iter().enumerate() {
        let mut model = DVector::zeros(states[0].model.len());
        for &src in w.graph().in_neighbors(dst) {
            model += &z[src] * weights[(dst, src)];
        }
        let norm = model.norm();
        if !norm.is_finite() || norm > divergence_cap {
            return Err(Error::Divergence { round, node: dst, value: norm });
        }
        next.push(NodeState { model, correction: state.correction, is_virtual: state.is_virtual });
    }
    Ok(next)
}

/// Result of a full optimization run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    /// Final models, every node of the (possibly extended) network.
    pub models: Vec<DVector<f64>>,
    /// Stationary weighting the metrics used.
    pub stationary: DVector<f64>,
    /// Per-round models (round 0 included) when recording was requested.
    pub trajectory: Option<Vec<Vec<DVector<f64>>>>,
}

fn initial_models(cfg: &OptimizerConfig, dim: usize, n_total: usize, n_real: usize) -> Vec<DVector<f64>> {
    (0..n_total)
        .map(|n| match cfg.init {
            InitMode::RandomNormal if n < n_real => {
                let mut rng = rng_for(cfg.seed, StreamKind::Init, n as u64);
                DVector::from_fn(dim, |_, _| cfg.init_std * rng.sample::<f64, _>(StandardNormal))
            }
            _ => DVector::zeros(dim),
        })
        .collect()
}

fn objective_dim(objectives: &[NodeObjective]) -> usize {
    let dim = objectives[0].dim();
    assert!(objectives.iter().all(|o| o.dim() == dim), "objective dimensions must agree");
    dim
}

/// The stationary weighting used for metrics: the exact power limit for a
/// static topology, the warm-up's realized product limit otherwise.
fn metrics_stationary(top: &Topology, fallback: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    match top {
        Topology::Static { matrix, .. } => Ok(perron_limit(matrix)?.pi),
        Topology::Varying { .. } => Ok(match fallback {
            Some(pi) => pi.clone(),
            None => DVector::from_element(top.n_total(), 1.0 / top.n_total() as f64),
        }),
    }
}

fn run_loop(
    cfg: &OptimizerConfig,
    top: &Topology,
    objectives: &[NodeObjective],
    corrections: &DVector<f64>,
    stationary: &DVector<f64>,
    round_offset: u64,
) -> Result<RunOutput> {
    let n_real = top.n_real();
    let n_total = top.n_total();
    assert_eq!(objectives.len(), n_real, "one objective per real node");
    assert_eq!(corrections.len(), n_total, "one correction per node");
    let dim = objective_dim(objectives);

    let mut states: Vec<NodeState> = initial_models(cfg, dim, n_total, n_real)
        .into_iter()
        .enumerate()
        .map(|(n, model)| NodeState {
            model,
            correction: if n < n_real { corrections[n] } else { 1.0 },
            is_virtual: n >= n_real,
        })
        .collect();
    let mut rngs: Vec<_> =
        (0..n_real).map(|n| rng_for(cfg.seed, StreamKind::Gradient, n as u64)).collect();

    let models_of = |states: &[NodeState]| -> Vec<DVector<f64>> {
        states.iter().map(|s| s.model.clone()).collect()
    };

    let mut trace = RunTrace::default();
    let mut models = models_of(&states);
    trace.rows.push(compute_round_metrics(&models, objectives, stationary, n_real, 0, 0.0));
    let mut tilde = weighted_average(&models, stationary);
    let mut trajectory = cfg.record_trajectory.then(|| vec![models.clone()]);

    for k in 0..cfg.rounds {
        let w = top.round_matrix(round_offset + k as u64);
        let gradients: Vec<DVector<f64>> = (0..n_real)
            .map(|n| objectives[n].stochastic_gradient(&states[n].model, &mut rngs[n]))
            .collect();
        // The identity the correction buys: the weighted average moves by
        // -eta * sum_n (pi_n d_n) g_n, which is -(eta/N) * sum g_n when the
        // corrections are exact.
        let mut expected_step = DVector::zeros(dim);
        for (n, g) in gradients.iter().enumerate() {
            expected_step += g * (stationary[n] * states[n].correction);
        }
        states = dtgo_round(&states, &gradients, &w, cfg.step_size, k, cfg.divergence_cap)?;
        models = models_of(&states);
        let new_tilde = weighted_average(&models, stationary);
        let drift = (&new_tilde - (&tilde - &expected_step * cfg.step_size)).abs().max();
        tilde = new_tilde;
        trace.rows.push(compute_round_metrics(&models, objectives, stationary, n_real, k + 1, drift));
        if let Some(t) = &mut trajectory {
            t.push(models.clone());
        }
    }

    Ok(RunOutput { trace, models, stationary: stationary.clone(), trajectory })
}

/// Runs the corrected loop with the warm-up's corrections over `cfg.rounds`
/// rounds of the topology. For a time-varying schedule the optimization
/// rounds continue where the warm-up stopped.
pub fn run_dtgo(
    cfg: &OptimizerConfig,
    top: &Topology,
    objectives: &[NodeObjective],
    warmup: &WarmupOutcome,
) -> Result<RunOutput> {
    let stationary = metrics_stationary(top, Some(&warmup.stationary))?;
    let offset = if top.is_static() { 0 } else { warmup.rounds_used() as u64 };
    run_loop(cfg, top, objectives, &warmup.corrections, &stationary, offset)
}

/// Plain decentralized SGD: the same loop with every correction pinned to 1.
pub fn run_dsgd(cfg: &OptimizerConfig, top: &Topology, objectives: &[NodeObjective]) -> Result<RunOutput> {
    let corrections = DVector::from_element(top.n_total(), 1.0);
    let stationary = metrics_stationary(top, None)?;
    run_loop(cfg, top, objectives, &corrections, &stationary, 0)
}

/// Centralized SGD on the mean of the local stochastic gradients, drawing
/// from the same per-node streams as the decentralized runs so paired
/// comparisons cancel sampling noise.
pub fn centralized_sgd(cfg: &OptimizerConfig, objectives: &[NodeObjective]) -> Result<RunOutput> {
    let n = objectives.len();
    let dim = objective_dim(objectives);
    let mut x = match cfg.init {
        InitMode::Zero => DVector::zeros(dim),
        InitMode::RandomNormal => {
            // Mean of the per-node draws, so paired runs share x-tilde at
            // round 0.
            let mut acc = DVector::zeros(dim);
            for node in 0..n {
                let mut rng = rng_for(cfg.seed, StreamKind::Init, node as u64);
                acc += DVector::from_fn(dim, |_, _| {
                    cfg.init_std * rng.sample::<f64, _>(StandardNormal)
                });
            }
            acc / n as f64
        }
    };
    let mut rngs: Vec<_> =
        (0..n).map(|node| rng_for(cfg.seed, StreamKind::Gradient, node as u64)).collect();
    // A single model has no spread and follows its own update exactly.
    let row = |x: &DVector<f64>, round: usize| crate::metrics::RoundMetrics {
        round,
        cost: crate::objective::average_value(objectives, x),
        ..Default::default()
    };

    let mut trace = RunTrace::default();
    trace.rows.push(row(&x, 0));
    let mut trajectory = cfg.record_trajectory.then(|| vec![vec![x.clone()]]);
    for k in 0..cfg.rounds {
        let mut g = DVector::zeros(dim);
        for (o, rng) in objectives.iter().zip(rngs.iter_mut()) {
            g += o.stochastic_gradient(&x, rng);
        }
        g /= n as f64;
        x -= g * cfg.step_size;
        let norm = x.norm();
        if !norm.is_finite() || norm > cfg.divergence_cap {
            return Err(Error::Divergence { round: k, node: 0, value: norm });
        }
        trace.rows.push(row(&x, k + 1));
        if let Some(t) = &mut trajectory {
            t.push(vec![x.clone()]);
        }
    }
    Ok(RunOutput {
        trace,
        models: vec![x],
        stationary: DVector::from_element(1, 1.0),
        trajectory,
    })
}

/// Per-round node values of plain gossip against influence-corrected gossip
/// from the same start.
#[derive(Debug, Clone)]
pub struct GossipDemoTrace {
    /// x <- Wx from the raw initial values; converges to the
    /// stationary-weighted average.
    pub plain: Vec<DVector<f64>>,
    /// x <- Wx from the correction-scaled initial values; converges to the
    /// true mean.
    pub corrected: Vec<DVector<f64>>,
    pub pi: DVector<f64>,
}

/// Runs both gossip variants for `rounds` rounds and records every state.
/// The corrections are computed from the matrix's exact power limit.
pub fn corrected_gossip_demo(
    w: &GossipMatrix,
    initial: &DVector<f64>,
    rounds: usize,
) -> Result<GossipDemoTrace> {
    let n = w.n_nodes();
    assert_eq!(initial.len(), n, "one initial value per node");
    let pi = perron_limit(w)?.pi;
    let corrected_start = DVector::from_fn(n, |i, _| initial[i] / (n as f64 * pi[i]));

    let step = |x: &DVector<f64>| -> DVector<f64> {
        let weights = w.weights();
        DVector::from_fn(n, |dst, _| {
            w.graph().in_neighbors(dst).iter().map(|&src| weights[(dst, src)] * x[src]).sum()
        })
    };

    let mut plain = vec![initial.clone()];
    let mut corrected = vec![corrected_start];
    for _ in 0..rounds {
        plain.push(step(plain.last().unwrap()));
        corrected.push(step(corrected.last().unwrap()));
    }
    Ok(GossipDemoTrace { plain, corrected, pi })
}
