//! Command-line front end: analyze a gossip topology, reproduce the
//! corrected-averaging demo, run configured experiment sweeps, or exercise
//! the invariant battery.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 runtime abort.

use clap::{Parser, Subcommand};
use dtgo::experiment::{parse_config, run_experiment, write_gossip_demo_csv, ObjectiveConfig};
use dtgo::gossip::{
    inverse_indegree_matrix, perron_limit, read_matrix_csv, GossipMatrix, Topology,
};
use dtgo::graph::DirectedGraph;
use dtgo::optim::corrected_gossip_demo;
use dtgo::selftest::run_battery;
use dtgo::stream::{rng_for, StreamKind};
use dtgo::warmup::{run_warmup, write_warmup_trace_csv, WarmupConfig};
use dtgo::Error;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "dtgo",
    version,
    about = "Deterministic simulator for gossip-based decentralized SGD on directed graphs with delays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the stationary weights, contraction rate, and mixing time of a
    /// gossip matrix.
    AnalyzeGraph {
        /// Edge-list file ("N" on the first line, then "src dst" lines) or a
        /// row-stochastic matrix CSV; the built-in five-node example when
        /// omitted.
        #[arg(long)]
        graph_file: Option<PathBuf>,
    },
    /// Run the corrected-averaging comparison on the five-node example and
    /// write both trajectories plus the warm-up trace as CSV.
    WarmupDemo {
        /// Output directory for the demo CSV files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Master seed for the initial scalars and node identifiers.
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Run an experiment sweep described by a config file.
    Run {
        /// Flat key = value config file; see the README for the grammar.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the dataset path of a logistic config.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the invariant battery and report each check.
    Selftest,
}

/// Validation and usage problems exit 1; aborts of a legal run exit 2.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::Parse { .. } => 1,
        _ => 2,
    }
}

fn load_gossip_matrix(path: Option<&PathBuf>) -> Result<GossipMatrix, Error> {
    let Some(path) = path else {
        return Ok(inverse_indegree_matrix(&DirectedGraph::example()));
    };
    if !path.exists() {
        return Err(Error::InvalidConfig(format!("cannot read {}", path.display())));
    }
    if path.extension().is_some_and(|e| e == "csv") {
        let m = read_matrix_csv(path)?;
        let n = m.nrows();
        let mut edges = Vec::new();
        for dst in 0..n {
            for src in 0..n {
                if m[(dst, src)] != 0.0 {
                    edges.push((src, dst));
                }
            }
        }
        GossipMatrix::new(m, DirectedGraph::new(n, &edges)?)
    } else {
        Ok(inverse_indegree_matrix(&DirectedGraph::read_edge_list(path)?))
    }
}

fn analyze_graph(graph_file: Option<&PathBuf>) -> Result<(), Error> {
    let w = load_gossip_matrix(graph_file)?;
    let summary = perron_limit(&w)?;
    println!("nodes: {}", w.n_nodes());
    let pi: Vec<String> = summary.pi.iter().map(|p| format!("{p}")).collect();
    println!("pi: {}", pi.join(" "));
    println!("rho: {}", summary.rho);
    println!("mixing_tau: {}", summary.mixing_tau);
    Ok(())
}

fn warmup_demo(out: &PathBuf, seed: u64) -> Result<(), Error> {
    let w = inverse_indegree_matrix(&DirectedGraph::example());
    let n = w.n_nodes();
    let mut rng = rng_for(seed, StreamKind::Demo, 0);
    // Initial scalars with variance 5, the spread used in the writeups.
    let initial =
        DVector::from_fn(n, |_, _| 5f64.sqrt() * rng.sample::<f64, _>(StandardNormal));
    let trace = corrected_gossip_demo(&w, &initial, 300)?;
    let (plain, corrected) = write_gossip_demo_csv(&trace, out)?;

    let top = Topology::from_matrix(w);
    let mut wcfg = WarmupConfig::new(64);
    wcfg.trace_stride = Some(1);
    let warmup = run_warmup(&top, &wcfg, seed)?;
    let warmup_csv = out.join("warmup_trace.csv");
    write_warmup_trace_csv(&warmup.trace, &warmup_csv)?;

    let mean = initial.mean();
    let weighted = trace.pi.dot(&initial);
    println!("initial values: {:?}", initial.as_slice());
    println!("true mean: {mean}");
    println!("stationary-weighted limit of plain gossip: {weighted}");
    println!("plain trajectory: {}", plain.display());
    println!("corrected trajectory: {}", corrected.display());
    println!("warm-up trace: {}", warmup_csv.display());
    Ok(())
}

fn run_from_config(
    config: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    dataset: Option<PathBuf>,
) -> Result<(), Error> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", config.display())))?;
    let mut spec = parse_config(&text)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(out) = out {
        spec.out_dir = out;
    }
    if let Some(path) = dataset {
        match &mut spec.objective {
            ObjectiveConfig::LogisticFile { path: p, .. } => *p = path,
            _ => {
                return Err(Error::InvalidConfig(
                    "--dataset only applies to objective = logistic".into(),
                ))
            }
        }
    }
    for w in spec.validate()? {
        eprintln!("warning: {w}");
    }
    let outcome = run_experiment(&spec)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for p in &outcome.points {
        let last = p.trace.rows.last().expect("runs have at least one round");
        println!(
            "{}: {}/{} replications -> {} (cost {} at round {})",
            p.label,
            p.replications_used,
            p.replications_used + p.aborted,
            p.file.display(),
            last.cost,
            last.round
        );
    }
    println!("manifest: {}", outcome.manifest.display());
    Ok(())
}

fn selftest() -> i32 {
    let mut failures = 0;
    for (name, outcome) in run_battery() {
        match outcome {
            Ok(()) => println!("ok      {name}"),
            Err(msg) => {
                failures += 1;
                println!("FAILED  {name}: {msg}");
            }
        }
    }
    if failures == 0 {
        println!("all checks passed");
        0
    } else {
        println!("{failures} check(s) failed");
        2
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help and --version through this path too; only
            // genuine usage errors exit nonzero.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::AnalyzeGraph { graph_file } => analyze_graph(graph_file.as_ref()),
        Command::WarmupDemo { out, seed } => warmup_demo(out, *seed),
        Command::Run { config, seed, out, dataset } => {
            run_from_config(config, *seed, out.clone(), dataset.clone())
        }
        Command::Selftest => std::process::exit(selftest()),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
