//! Experiment scenarios: sweeps over graph density, delay intensity, and
//! edge-drop probability, each point averaged over seeded replications
//! against a paired baseline, written out as plot-ready CSV plus a manifest.

use crate::gossip::{extend_with_delays, inverse_indegree_matrix, DelayMap, Topology};
use crate::graph::{gilbert_graph, DirectedGraph, GraphSchedule, ScheduleMode, GILBERT_RETRY_CAP};
use crate::metrics::{average_traces, RunTrace};
use crate::objective::{
    parse_libsvm, partition_uniform, synthetic_classification, Dataset, NodeObjective,
};
use crate::optim::{centralized_sgd, run_dsgd, run_dtgo, Baseline, InitMode, OptimizerConfig};
use crate::stream::{replication_seed, rng_for, StreamKind};
use crate::warmup::{run_warmup, WarmupConfig};
use crate::{Error, Result};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Poisson, StandardNormal};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Fraction of replications allowed to abort before the whole point fails.
pub const MAX_ABORT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Random graphs of varying density, no delays.
    GilbertSweep { p: Vec<f64> },
    /// Complete graph with Poisson-distributed per-edge delays.
    DelaySweep { lambda: Vec<f64> },
    /// Random graphs of varying density with a fixed delay intensity.
    Mixed { p: Vec<f64>, lambda: f64 },
    /// Static random base graph whose non-self edges drop independently
    /// each round.
    TimeVarying { p_err: Vec<f64>, base_p: f64 },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::GilbertSweep { .. } => "gilbert-sweep",
            Scenario::DelaySweep { .. } => "delay-sweep",
            Scenario::Mixed { .. } => "mixed",
            Scenario::TimeVarying { .. } => "timevarying",
        }
    }

    /// The sweep values, one per scenario point.
    pub fn points(&self) -> Vec<f64> {
        match self {
            Scenario::GilbertSweep { p } => p.clone(),
            Scenario::DelaySweep { lambda } => lambda.clone(),
            Scenario::Mixed { p, .. } => p.clone(),
            Scenario::TimeVarying { p_err, .. } => p_err.clone(),
        }
    }

    pub fn point_label(&self, value: f64) -> String {
        match self {
            Scenario::GilbertSweep { .. } => format!("p{value}"),
            Scenario::DelaySweep { .. } => format!("lambda{value}"),
            Scenario::Mixed { lambda, .. } => format!("p{value}_lambda{lambda}"),
            Scenario::TimeVarying { .. } => format!("perr{value}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveConfig {
    /// Per-node quadratics with seeded random centers and optional gradient
    /// noise.
    Quadratic { dim: usize, noise_std: f64, center_spread: f64 },
    /// Logistic regression over a dataset file in the sparse text format,
    /// partitioned uniformly across nodes.
    LogisticFile { path: PathBuf, lambda_reg: f64, batch_size: usize },
    /// Logistic regression over generated classification data; hermetic
    /// stand-in for file-based runs.
    LogisticSynthetic { n_samples: usize, dim: usize, lambda_reg: f64, batch_size: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub replications: usize,
    pub rounds: usize,
    pub warmup_rounds: usize,
    pub n_nodes: usize,
    pub objective: ObjectiveConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub step_size: f64,
    pub baseline: Baseline,
    pub init: InitMode,
    /// Whether relay nodes announce themselves during warm-up; hidden keeps
    /// corrections normalized by the real node count.
    pub virtual_ids_visible: bool,
}

impl ExperimentSpec {
    /// Checks the settings and returns human-readable warnings for legal
    /// but suspicious combinations.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        if self.n_nodes == 0 {
            return Err(Error::InvalidConfig("n_nodes must be at least 1".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        let points = self.scenario.points();
        if points.is_empty() {
            return Err(Error::InvalidConfig("scenario needs at least one sweep value".into()));
        }
        match &self.scenario {
            Scenario::GilbertSweep { p } | Scenario::Mixed { p, .. } => {
                if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::InvalidConfig("p values must lie in [0, 1]".into()));
                }
            }
            Scenario::DelaySweep { lambda } => {
                if lambda.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                    return Err(Error::InvalidConfig("lambda values must be nonnegative".into()));
                }
            }
            Scenario::TimeVarying { p_err, base_p } => {
                if p_err.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::InvalidConfig("p_err values must lie in [0, 1]".into()));
                }
                if !(0.0..=1.0).contains(base_p) {
                    return Err(Error::InvalidConfig("base_p must lie in [0, 1]".into()));
                }
                if p_err.iter().any(|&v| v == 1.0) {
                    warnings.push(
                        "p_err = 1 drops every non-self edge each round: nodes never communicate"
                            .into(),
                    );
                }
            }
        }
        if let Scenario::Mixed { lambda, .. } = &self.scenario {
            if !(*lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
            }
        }
        match &self.objective {
            ObjectiveConfig::Quadratic { dim, noise_std, center_spread } => {
                if *dim == 0 {
                    return Err(Error::InvalidConfig("quadratic dim must be at least 1".into()));
                }
                if *noise_std < 0.0 || *center_spread < 0.0 {
                    return Err(Error::InvalidConfig("noise_std and center_spread must be nonnegative".into()));
                }
            }
            ObjectiveConfig::LogisticFile { lambda_reg, .. } => {
                if *lambda_reg < 0.0 {
                    return Err(Error::InvalidConfig("lambda_reg must be nonnegative".into()));
                }
            }
            ObjectiveConfig::LogisticSynthetic { n_samples, dim, lambda_reg, .. } => {
                if *n_samples == 0 || *dim == 0 {
                    return Err(Error::InvalidConfig("synthetic data needs samples and features".into()));
                }
                if *lambda_reg < 0.0 {
                    return Err(Error::InvalidConfig("lambda_reg must be nonnegative".into()));
                }
                if *n_samples < self.n_nodes {
                    warnings.push(format!(
                        "{} samples over {} nodes leaves some shards empty",
                        n_samples, self.n_nodes
                    ));
                }
            }
        }
        Ok(warnings)
    }
}

/// Independent Poisson delay per non-self edge, in the graph's deterministic
/// edge order; zero draws are omitted so the map only lists delayed edges.
pub fn poisson_delay_map(graph: &DirectedGraph, lambda: f64, rng: &mut impl Rng) -> DelayMap {
    assert!(lambda >= 0.0 && lambda.is_finite(), "delay intensity must be nonnegative");
    let mut map = DelayMap::new();
    if lambda == 0.0 {
        return map;
    }
    let dist = Poisson::new(lambda).expect("lambda checked positive");
    for (src, dst) in graph.edges() {
        if src == dst {
            continue;
        }
        let draw = rng.sample(dist) as u32;
        if draw > 0 {
            map.insert((src, dst), draw);
        }
    }
    map
}

/// One averaged scenario point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub label: String,
    pub value: f64,
    pub file: PathBuf,
    pub trace: RunTrace,
    pub replications_used: usize,
    pub aborted: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub points: Vec<PointResult>,
    pub manifest: PathBuf,
    pub warnings: Vec<String>,
}

fn load_dataset(spec: &ExperimentSpec) -> Result<Option<Arc<Dataset>>> {
    match &spec.objective {
        ObjectiveConfig::Quadratic { .. } => Ok(None),
        ObjectiveConfig::LogisticFile { path, .. } => {
            let text = std::fs::read_to_string(path)?;
            Ok(Some(Arc::new(parse_libsvm(&text)?)))
        }
        ObjectiveConfig::LogisticSynthetic { n_samples, dim, .. } => {
            let mut rng = rng_for(spec.seed, StreamKind::Objective, 0);
            Ok(Some(Arc::new(synthetic_classification(*n_samples, *dim, 0.1, &mut rng))))
        }
    }
}

fn build_objectives(
    spec: &ExperimentSpec,
    dataset: Option<&Arc<Dataset>>,
    rep_seed: u64,
) -> Vec<NodeObjective> {
    match &spec.objective {
        ObjectiveConfig::Quadratic { dim, noise_std, center_spread } => (0..spec.n_nodes)
            .map(|n| {
                let mut rng = rng_for(rep_seed, StreamKind::Objective, n as u64);
                let center = DVector::from_fn(*dim, |_, _| {
                    *center_spread * rng.sample::<f64, _>(StandardNormal)
                });
                NodeObjective::quadratic_noisy(center, *noise_std)
            })
            .collect(),
        ObjectiveConfig::LogisticFile { lambda_reg, batch_size, .. }
        | ObjectiveConfig::LogisticSynthetic { lambda_reg, batch_size, .. } => {
            let data = dataset.expect("logistic objectives carry a dataset").clone();
            let mut rng = rng_for(rep_seed, StreamKind::Partition, 0);
            partition_uniform(data.n_samples(), spec.n_nodes, &mut rng)
                .into_iter()
                .map(|shard| NodeObjective::logistic(data.clone(), shard, *lambda_reg, *batch_size))
                .collect()
        }
    }
}

fn build_topology(spec: &ExperimentSpec, point: f64, rep_seed: u64) -> Result<Topology> {
    let n = spec.n_nodes;
    match &spec.scenario {
        Scenario::GilbertSweep { .. } => {
            let mut rng = rng_for(rep_seed, StreamKind::Graph, 0);
            let g = gilbert_graph(n, point, &mut rng, GILBERT_RETRY_CAP)?;
            Ok(Topology::from_matrix(inverse_indegree_matrix(&g)))
        }
        Scenario::DelaySweep { .. } => {
            let g = DirectedGraph::complete(n);
            let mut rng = rng_for(rep_seed, StreamKind::Delays, 0);
            let delays = poisson_delay_map(&g, point, &mut rng);
            let net = extend_with_delays(&inverse_indegree_matrix(&g), &delays)?;
            Ok(Topology::from_delayed(&net))
        }
        Scenario::Mixed { lambda, .. } => {
            let mut rng = rng_for(rep_seed, StreamKind::Graph, 0);
            let g = gilbert_graph(n, point, &mut rng, GILBERT_RETRY_CAP)?;
            let mut delay_rng = rng_for(rep_seed, StreamKind::Delays, 0);
            let delays = poisson_delay_map(&g, *lambda, &mut delay_rng);
            let net = extend_with_delays(&inverse_indegree_matrix(&g), &delays)?;
            Ok(Topology::from_delayed(&net))
        }
        Scenario::TimeVarying { base_p, .. } => {
            let mut rng = rng_for(rep_seed, StreamKind::Graph, 0);
            let g = gilbert_graph(n, *base_p, &mut rng, GILBERT_RETRY_CAP)?;
            let schedule = GraphSchedule::new(g, ScheduleMode::EdgeDrop { p_err: point }, rep_seed)?;
            Ok(Topology::from_schedule(schedule))
        }
    }
}

fn run_replication(
    spec: &ExperimentSpec,
    point: f64,
    dataset: Option<&Arc<Dataset>>,
    rep_seed: u64,
) -> Result<RunTrace> {
    let top = build_topology(spec, point, rep_seed)?;
    let objectives = build_objectives(spec, dataset, rep_seed);
    let wcfg = WarmupConfig {
        rounds: spec.warmup_rounds,
        virtual_ids_visible: spec.virtual_ids_visible,
        trace_stride: None,
    };
    let warmup = run_warmup(&top, &wcfg, rep_seed)?;
    let mut cfg = OptimizerConfig::new(spec.step_size, spec.rounds, rep_seed)?;
    cfg.init = spec.init;
    cfg.baseline = spec.baseline;
    let mut out = run_dtgo(&cfg, &top, &objectives, &warmup)?;
    match spec.baseline {
        Baseline::Centralized => {
            let base = centralized_sgd(&cfg, &objectives)?;
            out.trace.apply_baseline(&base.trace);
        }
        Baseline::Dsgd => {
            let base = run_dsgd(&cfg, &top, &objectives)?;
            out.trace.apply_baseline(&base.trace);
        }
        Baseline::None => {}
    }
    Ok(out.trace)
}

fn manifest_text(spec: &ExperimentSpec, points: &[PointResult]) -> String {
    let mut out = String::from("{\n");
    out.push_str(&format!("  \"scenario\": \"{}\",\n", spec.scenario.name()));
    out.push_str(&format!("  \"seed\": {},\n", spec.seed));
    out.push_str(&format!("  \"n_nodes\": {},\n", spec.n_nodes));
    out.push_str(&format!("  \"replications\": {},\n", spec.replications));
    out.push_str(&format!("  \"rounds\": {},\n", spec.rounds));
    out.push_str(&format!("  \"warmup_rounds\": {},\n", spec.warmup_rounds));
    out.push_str("  \"points\": [\n");
    for (i, p) in points.iter().enumerate() {
        out.push_str(&format!(
            "    {{\"label\": \"{}\", \"value\": {}, \"file\": \"{}\", \"replications_used\": {}, \"aborted\": {}}}{}\n",
            p.label,
            p.value,
            p.file.file_name().unwrap().to_string_lossy(),
            p.replications_used,
            p.aborted,
            if i + 1 < points.len() { "," } else { "" }
        ));
    }
    out.push_str("  ]\n}\n");
    out
}

/// Runs every scenario point for `spec.replications` independent seeded
/// replications in parallel, averages the paired traces pointwise, and
/// writes one CSV per point plus a manifest into `spec.out_dir`.
///
/// Replication seeds derive from the master seed and the (point, rep) pair,
/// so outputs are byte-identical across reruns and thread schedules. Aborted
/// replications are excluded and reported; more than a tenth of them aborting
/// fails the point.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let mut warnings = spec.validate()?;
    let dataset = load_dataset(spec)?;
    if let Some(ds) = &dataset {
        if ds.n_samples() < spec.n_nodes {
            warnings.push(format!(
                "{} samples over {} nodes leaves some shards empty",
                ds.n_samples(),
                spec.n_nodes
            ));
        }
    }
    std::fs::create_dir_all(&spec.out_dir)?;

    let mut points = Vec::new();
    for (point_idx, value) in spec.scenario.points().into_iter().enumerate() {
        let results: Vec<Result<RunTrace>> = (0..spec.replications)
            .into_par_iter()
            .map(|rep| {
                let rep_seed = replication_seed(
                    spec.seed,
                    ((point_idx as u64) << 32) | rep as u64,
                );
                run_replication(spec, value, dataset.as_ref(), rep_seed)
            })
            .collect();

        let total = results.len();
        let mut traces = Vec::new();
        let mut aborted = 0;
        for (rep, r) in results.into_iter().enumerate() {
            match r {
                Ok(t) => traces.push(t),
                Err(e) => {
                    aborted += 1;
                    warnings.push(format!(
                        "point {} replication {rep} aborted: {e}",
                        spec.scenario.point_label(value)
                    ));
                }
            }
        }
        if (aborted as f64) > MAX_ABORT_FRACTION * total as f64 {
            return Err(Error::TooManyAborts { failed: aborted, total });
        }

        let label = spec.scenario.point_label(value);
        let file = spec.out_dir.join(format!("{label}.csv"));
        let averaged = average_traces(&traces);
        averaged.write_csv(&file)?;
        points.push(PointResult {
            label,
            value,
            file,
            trace: averaged,
            replications_used: traces.len(),
            aborted,
        });
    }

    let manifest = spec.out_dir.join("manifest.json");
    std::fs::write(&manifest, manifest_text(spec, &points))?;
    Ok(ExperimentOutcome { points, manifest, warnings })
}

/// Parses the flat `key = value` experiment configuration format.
///
/// One setting per line; `#` starts a comment; keys may appear once. Lists
/// are comma-separated. Unknown keys are rejected so typos fail loudly.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let mut seen = std::collections::BTreeMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = line_no + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("expected key = value, got {content:?}") })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if seen.insert(key.clone(), (line, value)).is_some() {
            return Err(Error::Parse { line, msg: format!("duplicate key {key}") });
        }
    }

    let mut take = |key: &str| seen.remove(key).map(|(_, v)| v);
    let parse_f64 = |key: &str, v: &str| -> Result<f64> {
        v.parse().map_err(|_| Error::InvalidConfig(format!("{key}: bad number {v:?}")))
    };
    let parse_usize = |key: &str, v: &str| -> Result<usize> {
        v.parse().map_err(|_| Error::InvalidConfig(format!("{key}: bad integer {v:?}")))
    };
    let parse_list = |key: &str, v: &str| -> Result<Vec<f64>> {
        v.split(',')
            .map(|tok| {
                tok.trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("{key}: bad number {tok:?}")))
            })
            .collect()
    };

    let scenario_name = take("scenario")
        .ok_or_else(|| Error::InvalidConfig("missing required key: scenario".into()))?;
    let scenario = match scenario_name.as_str() {
        "gilbert-sweep" => {
            let p = take("p").ok_or_else(|| Error::InvalidConfig("gilbert-sweep needs p".into()))?;
            Scenario::GilbertSweep { p: parse_list("p", &p)? }
        }
        "delay-sweep" => {
            let l = take("lambda")
                .ok_or_else(|| Error::InvalidConfig("delay-sweep needs lambda".into()))?;
            Scenario::DelaySweep { lambda: parse_list("lambda", &l)? }
        }
        "mixed" => {
            let p = take("p").ok_or_else(|| Error::InvalidConfig("mixed needs p".into()))?;
            let l = take("lambda")
                .ok_or_else(|| Error::InvalidConfig("mixed needs lambda".into()))?;
            Scenario::Mixed { p: parse_list("p", &p)?, lambda: parse_f64("lambda", &l)? }
        }
        "timevarying" => {
            let q = take("p_err")
                .ok_or_else(|| Error::InvalidConfig("timevarying needs p_err".into()))?;
            let base_p = match take("base_p") {
                Some(v) => parse_f64("base_p", &v)?,
                None => 0.5,
            };
            Scenario::TimeVarying { p_err: parse_list("p_err", &q)?, base_p }
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown scenario {other:?} (want gilbert-sweep, delay-sweep, mixed, or timevarying)"
            )))
        }
    };

    let objective_name = take("objective").unwrap_or_else(|| "quadratic".into());
    let lambda_reg = match take("lambda_reg") {
        Some(v) => parse_f64("lambda_reg", &v)?,
        None => 1.0 / 8124.0,
    };
    let batch_size = match take("batch_size") {
        Some(v) => parse_usize("batch_size", &v)?,
        None => 1,
    };
    let objective = match objective_name.as_str() {
        "quadratic" => ObjectiveConfig::Quadratic {
            dim: match take("dim") {
                Some(v) => parse_usize("dim", &v)?,
                None => 4,
            },
            noise_std: match take("noise_std") {
                Some(v) => parse_f64("noise_std", &v)?,
                None => 1.0,
            },
            center_spread: match take("center_spread") {
                Some(v) => parse_f64("center_spread", &v)?,
                None => 1.0,
            },
        },
        "logistic" => ObjectiveConfig::LogisticFile {
            path: PathBuf::from(
                take("dataset")
                    .ok_or_else(|| Error::InvalidConfig("logistic needs dataset = <path>".into()))?,
            ),
            lambda_reg,
            batch_size,
        },
        "logistic-synthetic" => ObjectiveConfig::LogisticSynthetic {
            n_samples: match take("n_samples") {
                Some(v) => parse_usize("n_samples", &v)?,
                None => 500,
            },
            dim: match take("dim") {
                Some(v) => parse_usize("dim", &v)?,
                None => 10,
            },
            lambda_reg,
            batch_size,
        },
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown objective {other:?} (want quadratic, logistic, or logistic-synthetic)"
            )))
        }
    };

    let spec = ExperimentSpec {
        scenario,
        replications: match take("replications") {
            Some(v) => parse_usize("replications", &v)?,
            None => 20,
        },
        rounds: match take("rounds") {
            Some(v) => parse_usize("rounds", &v)?,
            None => 250,
        },
        warmup_rounds: match take("warmup_rounds") {
            Some(v) => parse_usize("warmup_rounds", &v)?,
            None => 512,
        },
        n_nodes: match take("n_nodes") {
            Some(v) => parse_usize("n_nodes", &v)?,
            None => 10,
        },
        objective,
        out_dir: PathBuf::from(take("out").unwrap_or_else(|| "out".into())),
        seed: match take("seed") {
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("seed: bad integer {v:?}")))?,
            None => 2024,
        },
        step_size: match take("step_size") {
            Some(v) => parse_f64("step_size", &v)?,
            None => 0.1,
        },
        baseline: match take("baseline").as_deref() {
            None | Some("centralized") => Baseline::Centralized,
            Some("dsgd") => Baseline::Dsgd,
            Some("none") => Baseline::None,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "unknown baseline {other:?} (want centralized, dsgd, or none)"
                )))
            }
        },
        init: match take("init").as_deref() {
            None | Some("zero") => InitMode::Zero,
            Some("random") => InitMode::RandomNormal,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "unknown init {other:?} (want zero or random)"
                )))
            }
        },
        virtual_ids_visible: match take("virtual_ids").as_deref() {
            None | Some("hidden") => false,
            Some("visible") => true,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "unknown virtual_ids {other:?} (want hidden or visible)"
                )))
            }
        },
    };

    if let Some((line, _)) = seen.values().next() {
        let keys: Vec<&str> = seen.keys().map(String::as_str).collect();
        return Err(Error::Parse {
            line: *line,
            msg: format!("unknown key(s): {}", keys.join(", ")),
        });
    }
    Ok(spec)
}

/// Writes both demo trajectories of the corrected-gossip comparison as CSV:
/// one row per round, one column per node.
pub fn write_gossip_demo_csv(
    trace: &crate::optim::GossipDemoTrace,
    dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let write = |name: &str, rows: &[DVector<f64>]| -> Result<PathBuf> {
        let n = rows[0].len();
        let mut out = String::from("round");
        for i in 0..n {
            out.push_str(&format!(",node{i}"));
        }
        out.push('\n');
        for (k, row) in rows.iter().enumerate() {
            out.push_str(&k.to_string());
            for v in row.iter() {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        let path = dir.join(name);
        std::fs::write(&path, out)?;
        Ok(path)
    };
    Ok((
        write("gossip_plain.csv", &trace.plain)?,
        write("gossip_corrected.csv", &trace.corrected)?,
    ))
}
