//! Command-line front end: simulate synthetic incidents, score datasets,
//! run root-cause analysis, perturb graphs, and drive the benchmark grid.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rca_core::bench::{run_experiment_with_interrupt, ExperimentConfig};
use rca_core::rca::{
    classic_traversal, score_ordering, smooth_traversal_with, Method, ParentScoreMode,
};
use rca_core::scm::{sample_random_scm, ScmConfig};
use rca_core::scoring::{column_stds, estimate_scores, Dataset, FeatureKind};
use rca_core::{perturb_graph, shd, CausalDag};

#[derive(Parser)]
#[command(
    name = "rca",
    version,
    about = "Root-cause analysis from marginal anomaly scores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic SCM, normal-period data, and one injected anomaly
    Simulate {
        /// Number of variables
        #[arg(long)]
        nodes: usize,
        /// Constrain the causal graph to a polytree
        #[arg(long)]
        polytree: bool,
        /// Anomaly strength in multiples of the root cause's marginal std
        #[arg(long)]
        strength: f64,
        #[arg(long)]
        seed: u64,
        /// Output directory for scm.json, normal.csv, anomalous.csv, truth.json
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        normal_samples: usize,
        /// Probability that a non-root mechanism is linear
        #[arg(long, default_value_t = 0.2)]
        linear_probability: f64,
    },
    /// Estimate marginal anomaly scores from a dataset CSV
    Score {
        /// CSV with a header of variable names; the last row is the anomalous
        /// observation unless overridden
        #[arg(long)]
        data: PathBuf,
        /// Single-row CSV holding the anomalous observation separately
        #[arg(long, conflicts_with = "anomalous_row")]
        anomalous: Option<PathBuf>,
        /// 0-based index of the anomalous row inside the data CSV
        #[arg(long)]
        anomalous_row: Option<usize>,
        #[arg(long, default_value = "abs-z-score")]
        feature: String,
        /// Write the JSON here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a root-cause analysis method on a dataset
    Analyze {
        /// smooth-traversal, score-ordering, or classic-traversal
        #[arg(long)]
        method: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, conflicts_with = "anomalous_row")]
        anomalous: Option<PathBuf>,
        #[arg(long)]
        anomalous_row: Option<usize>,
        /// Graph JSON, required by the traversal methods
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Anomalous target variable for the traversal methods
        #[arg(long)]
        target: Option<String>,
        /// Assumed maximum in-degree for score-ordering
        #[arg(long)]
        dmax: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Anomaly threshold for classic-traversal
        #[arg(long, default_value_t = 3.0)]
        threshold: f64,
        #[arg(long, default_value = "abs-z-score")]
        feature: String,
        /// Scan the whole graph instead of the target's ancestors
        #[arg(long)]
        scan_all: bool,
        /// Compare against the joint parent score instead of the maximum
        #[arg(long)]
        joint_parents: bool,
    },
    /// Run the synthetic benchmark grid described by a JSON config
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Directory for metrics.json, metrics.csv, and optional trials.jsonl
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Randomly perturb a graph to an exact structural Hamming distance
    Perturb {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        shd: usize,
        #[arg(long)]
        seed: u64,
        /// Write the perturbed graph here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage<S: Into<String>>(msg: S) -> Self {
        CliError::Usage(msg.into())
    }

    fn runtime<S: Into<String>>(msg: S) -> Self {
        CliError::Runtime(msg.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            nodes,
            polytree,
            strength,
            seed,
            out,
            normal_samples,
            linear_probability,
        } => cmd_simulate(
            nodes,
            polytree,
            strength,
            seed,
            &out,
            normal_samples,
            linear_probability,
        ),
        Command::Score {
            data,
            anomalous,
            anomalous_row,
            feature,
            out,
        } => cmd_score(&data, anomalous.as_deref(), anomalous_row, &feature, out.as_deref()),
        Command::Analyze {
            method,
            data,
            anomalous,
            anomalous_row,
            graph,
            target,
            dmax,
            alpha,
            threshold,
            feature,
            scan_all,
            joint_parents,
        } => cmd_analyze(AnalyzeArgs {
            method,
            data,
            anomalous,
            anomalous_row,
            graph,
            target,
            dmax,
            alpha,
            threshold,
            feature,
            scan_all,
            joint_parents,
        }),
        Command::Bench { config, out_dir } => cmd_bench(&config, &out_dir),
        Command::Perturb {
            graph,
            shd: target_shd,
            seed,
            out,
        } => cmd_perturb(&graph, target_shd, seed, out.as_deref()),
    }
}

fn parse_feature(spec: &str) -> Result<FeatureKind, CliError> {
    spec.parse::<FeatureKind>()
        .map_err(|e| CliError::usage(e.to_string()))
}

fn load_dataset(
    data: &Path,
    anomalous: Option<&Path>,
    anomalous_row: Option<usize>,
) -> Result<Dataset, CliError> {
    let result = match anomalous {
        Some(path) => Dataset::from_split_csv(data, path),
        None => Dataset::from_csv_path(data, anomalous_row),
    };
    result.map_err(|e| CliError::runtime(format!("failed to read dataset: {e}")))
}

fn cmd_simulate(
    nodes: usize,
    polytree: bool,
    strength: f64,
    seed: u64,
    out: &Path,
    normal_samples: usize,
    linear_probability: f64,
) -> Result<(), CliError> {
    if nodes == 0 {
        return Err(CliError::usage("--nodes must be at least 1"));
    }
    if normal_samples == 0 {
        return Err(CliError::usage("--normal-samples must be at least 1"));
    }
    if !strength.is_finite() {
        return Err(CliError::usage("--strength must be finite"));
    }
    if !(0.0..=1.0).contains(&linear_probability) {
        return Err(CliError::usage("--linear-probability must lie in [0, 1]"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = ScmConfig::new(nodes);
    config.polytree = polytree;
    config.linear_probability = linear_probability;
    let scm =
        sample_random_scm(&config, &mut rng).map_err(|e| CliError::runtime(e.to_string()))?;
    let dag = scm.dag();

    let rows = scm.sample_normal(normal_samples, &mut rng);
    let root_cause = rng.random_range(0..dag.node_count());
    let descendants = dag.descendant_indices(root_cause);
    let target = descendants[rng.random_range(0..descendants.len())];
    let stds = column_stds(&rows);
    let truth = dag.node_name(root_cause).to_string();
    let anomalous = scm
        .inject_anomaly(&truth, strength, &stds, &mut rng)
        .map_err(|e| CliError::runtime(e.to_string()))?;

    std::fs::create_dir_all(out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))?;

    let write = |name: &str, bytes: &[u8]| -> Result<(), CliError> {
        std::fs::write(out.join(name), bytes)
            .map_err(|e| CliError::runtime(format!("cannot write {name}: {e}")))
    };

    write(
        "scm.json",
        serde_json::to_string_pretty(&scm)
            .map_err(|e| CliError::runtime(e.to_string()))?
            .as_bytes(),
    )?;
    write("normal.csv", csv_bytes(dag.node_names(), &rows).as_bytes())?;
    write(
        "anomalous.csv",
        csv_bytes(dag.node_names(), std::slice::from_ref(&anomalous)).as_bytes(),
    )?;
    let truth_json = serde_json::json!({
        "root_cause": truth,
        "target": dag.node_name(target),
        "strength": strength,
        "seed": seed,
    });
    write(
        "truth.json",
        serde_json::to_string_pretty(&truth_json)
            .map_err(|e| CliError::runtime(e.to_string()))?
            .as_bytes(),
    )?;
    eprintln!(
        "wrote scm.json, normal.csv, anomalous.csv, truth.json to {}",
        out.display()
    );
    Ok(())
}

fn csv_bytes(names: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = names.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn cmd_score(
    data: &Path,
    anomalous: Option<&Path>,
    anomalous_row: Option<usize>,
    feature: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let kind = parse_feature(feature)?;
    let dataset = load_dataset(data, anomalous, anomalous_row)?;
    let scores = estimate_scores(&dataset, kind)
        .map_err(|e| CliError::runtime(format!("scoring failed: {e}")))?;
    emit(&scores.to_json(), out)
}

struct AnalyzeArgs {
    method: String,
    data: PathBuf,
    anomalous: Option<PathBuf>,
    anomalous_row: Option<usize>,
    graph: Option<PathBuf>,
    target: Option<String>,
    dmax: Option<usize>,
    alpha: f64,
    threshold: f64,
    feature: String,
    scan_all: bool,
    joint_parents: bool,
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let method: Method = args
        .method
        .parse()
        .map_err(|e: String| CliError::usage(e))?;
    let kind = parse_feature(&args.feature)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::usage(format!(
            "--alpha {} must lie in (0, 1)",
            args.alpha
        )));
    }

    let needs_graph = matches!(method, Method::SmoothTraversal | Method::ClassicTraversal);
    let graph = match (&args.graph, needs_graph) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::runtime(format!("cannot read graph: {e}")))?;
            Some(
                CausalDag::from_json(&text)
                    .map_err(|e| CliError::runtime(format!("invalid graph: {e}")))?,
            )
        }
        (None, true) => {
            return Err(CliError::usage(format!(
                "--graph is required for {}",
                method.as_str()
            )))
        }
        (None, false) => None,
    };

    let dataset = load_dataset(&args.data, args.anomalous.as_deref(), args.anomalous_row)?;
    let scores = estimate_scores(&dataset, kind)
        .map_err(|e| CliError::runtime(format!("scoring failed: {e}")))?;

    let json = match method {
        Method::SmoothTraversal => {
            let dag = graph.as_ref().unwrap();
            let target = match (&args.target, args.scan_all) {
                (Some(t), _) => Some(t.as_str()),
                (None, true) => None,
                (None, false) => {
                    return Err(CliError::usage(
                        "--target is required for smooth-traversal (or pass --scan-all)",
                    ))
                }
            };
            let mode = if args.joint_parents {
                ParentScoreMode::JointParent
            } else {
                ParentScoreMode::MaxParent
            };
            let result = smooth_traversal_with(&scores, dag, target, mode)
                .map_err(|e| CliError::runtime(e.to_string()))?;
            serde_json::to_string_pretty(&result).expect("result serializes")
        }
        Method::ScoreOrdering => {
            let d_max = args
                .dmax
                .ok_or_else(|| CliError::usage("--dmax is required for score-ordering"))?;
            if d_max == 0 {
                return Err(CliError::usage("--dmax must be at least 1"));
            }
            let mut set = score_ordering(&scores, d_max, args.alpha);
            if let Some(dag) = &graph {
                set = set.with_polytree_check(dag);
            }
            serde_json::to_string_pretty(&set).expect("set serializes")
        }
        Method::ClassicTraversal => {
            let dag = graph.as_ref().unwrap();
            let target = args.target.as_deref().ok_or_else(|| {
                CliError::usage("--target is required for classic-traversal")
            })?;
            let candidates = classic_traversal(&scores, dag, target, args.threshold)
                .map_err(|e| CliError::runtime(e.to_string()))?;
            let value = serde_json::json!({
                "method": method.as_str(),
                "candidates": candidates,
                "threshold": args.threshold,
            });
            serde_json::to_string_pretty(&value).expect("value serializes")
        }
    };
    println!("{json}");
    Ok(())
}

fn cmd_bench(config_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::runtime(format!("cannot read config: {e}")))?;
    let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown variant") {
            CliError::usage(format!(
                "{msg}; valid methods are smooth_traversal, score_ordering, classic_traversal"
            ))
        } else {
            CliError::usage(format!("invalid config: {msg}"))
        }
    })?;
    config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    install_sigint_handler();
    let report =
        run_experiment_with_interrupt(&config, || INTERRUPTED.load(Ordering::Relaxed))
            .map_err(|e| CliError::runtime(e.to_string()))?;

    if INTERRUPTED.load(Ordering::Relaxed) {
        let partial = out_dir.join("metrics.partial.json");
        std::fs::write(&partial, report.to_json())
            .map_err(|e| CliError::runtime(format!("cannot write partial results: {e}")))?;
        return Err(CliError::runtime(format!(
            "interrupted; partial results written to {}",
            partial.display()
        )));
    }

    std::fs::write(out_dir.join("metrics.json"), report.to_json())
        .map_err(|e| CliError::runtime(format!("cannot write metrics.json: {e}")))?;
    std::fs::write(out_dir.join("metrics.csv"), report.to_csv())
        .map_err(|e| CliError::runtime(format!("cannot write metrics.csv: {e}")))?;
    if let Some(log) = &report.trial_log {
        let mut lines = String::new();
        for entry in log {
            lines.push_str(&serde_json::to_string(entry).expect("log entry serializes"));
            lines.push('\n');
        }
        std::fs::write(out_dir.join("trials.jsonl"), lines)
            .map_err(|e| CliError::runtime(format!("cannot write trials.jsonl: {e}")))?;
    }
    print!("{}", report.summary_table());
    Ok(())
}

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

extern "C" fn mark_interrupted(_sig: i32) {
    INTERRUPTED.store(true, Ordering::Relaxed);
}

/// Routes SIGINT into a flag so the trial loop can stop early and flush
/// partial results.
fn install_sigint_handler() {
    extern "C" {
        fn signal(signum: i32, handler: usize) -> usize;
    }
    const SIGINT: i32 = 2;
    unsafe {
        signal(SIGINT, mark_interrupted as *const () as usize);
    }
}

fn cmd_perturb(
    graph_path: &Path,
    target_shd: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(graph_path)
        .map_err(|e| CliError::runtime(format!("cannot read graph: {e}")))?;
    let dag = CausalDag::from_json(&text)
        .map_err(|e| CliError::runtime(format!("invalid graph: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturbed =
        perturb_graph(&dag, target_shd, &mut rng).map_err(|e| CliError::runtime(e.to_string()))?;
    let achieved = shd(&dag, &perturbed).map_err(|e| CliError::runtime(e.to_string()))?;
    eprintln!("achieved SHD {achieved} (requested {target_shd})");
    emit(&perturbed.to_json(), out)
}

fn emit(json: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, json)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}
