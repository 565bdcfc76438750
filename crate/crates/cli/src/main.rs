//! `tinyblock` command-line entry point.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::warn;

use tinyblock_cli::bench::bench_scaling;
use tinyblock_cli::config::PipelineConfig;
use tinyblock_cli::export::{export_views, ExportFormat};
use tinyblock_cli::pipeline::{run_pipeline, RunReport};
use tinyblock_core::error::{Error, Result};
use tinyblock_core::evalkit::{
    coordinated_f1, partition_from_labels, quality_score, read_truth_labels,
};
use tinyblock_core::flag::{import_external_labels, GroupThresholds};
use tinyblock_core::graphio::{load_attributes, load_edge_list, UnknownNodePolicy};
use tinyblock_core::report::MetricReport;
use tinyblock_core::synthgen::{sweep, write_dataset, GeneratorConfig};

#[derive(Parser)]
#[command(name = "tinyblock", version, about = "Tiny coordinated-group detection on attributed graphs", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground-truthed synthetic datasets.
    Synth {
        /// Node (and attribute) count for a single instance.
        #[arg(long)]
        n: Option<usize>,
        /// Attribute count; defaults to n.
        #[arg(long)]
        d: Option<usize>,
        /// Comma-separated sizes for a sweep (n = d per size).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Instances per size.
        #[arg(long, default_value_t = 1)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Mirror every edge (undirected model).
        #[arg(long, default_value_t = false)]
        symmetric: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the detection pipeline from a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (overrides TINYBLOCK_THREADS and the config).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score predicted labels against ground truth.
    Eval {
        /// Ground-truth labels file (node label, 0 = background).
        #[arg(long)]
        truth: PathBuf,
        /// Predicted labels file, or a report.json whose run directory
        /// holds predicted_labels.txt.
        #[arg(long)]
        pred: PathBuf,
        /// Edge list; defaults to the one recorded in the report when
        /// --pred is a report.json.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Attribute triplets; enables the attribute-side F1 stage.
        #[arg(long)]
        attributes: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        p_star: f64,
        #[arg(long, default_value_t = 0.01)]
        q_star: f64,
        /// Node-size bounds, e.g. 10,80.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [10, 80])]
        size_bounds: Vec<usize>,
        /// Attribute-set size bounds, e.g. 10,80.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [10, 80])]
        attr_bounds: Vec<usize>,
        /// Write the metric report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the map and flag stages across sizes and fit against nnz.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        instances: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 9)]
        m: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Write the benchmark report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export views (GraphML cluster graph, CSV tables) from a run.
    Export {
        /// Path to a run's report.json.
        #[arg(long)]
        report: PathBuf,
        /// graphml or csv.
        #[arg(long)]
        format: String,
        /// Output directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(err) = dispatch() {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

fn env_threads() -> Option<usize> {
    std::env::var("TINYBLOCK_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
}

fn init_thread_pool(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build_global()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))
}

fn dispatch() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth {
            n,
            d,
            sizes,
            instances,
            seed,
            symmetric,
            out,
        } => {
            match (sizes, n) {
                (Some(sizes), _) => {
                    let dirs = sweep(&sizes, instances, seed, &out)?;
                    println!("wrote {} dataset(s) under {}", dirs.len(), out.display());
                }
                (None, Some(n)) => {
                    let mut config = GeneratorConfig::defaults(n, d.unwrap_or(n));
                    config.symmetric = symmetric;
                    let manifest = write_dataset(&config, seed, &out)?;
                    println!(
                        "wrote dataset under {} (edges sha256 {})",
                        out.display(),
                        manifest.checksums.edges
                    );
                }
                (None, None) => {
                    return Err(Error::validation("synth needs --n or --sizes"));
                }
            }
            Ok(())
        }
        Command::Run {
            config,
            threads,
            out,
            seed,
        } => {
            let mut cfg = PipelineConfig::from_json(&fs::read_to_string(&config)?)?;
            // Flags win over the environment, which wins over the file.
            if let Some(dir) = out {
                cfg.output = dir.to_string_lossy().into_owned();
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(threads) = threads.or_else(env_threads) {
                cfg.threads = threads;
            }
            init_thread_pool(cfg.threads)?;
            let artifacts = run_pipeline(&cfg)?;
            let flagged = artifacts
                .report
                .clusters
                .iter()
                .filter(|c| c.flagged)
                .count();
            println!(
                "run complete: {} clusters, {} flagged, reports under {}",
                artifacts.report.clusters.len(),
                flagged,
                artifacts.outdir.display()
            );
            if let Some(metrics) = &artifacts.report.metrics {
                println!(
                    "quality = {:.2}, f1 = {:.2}",
                    metrics.quality, metrics.f1
                );
            }
            Ok(())
        }
        Command::Eval {
            truth,
            pred,
            edges,
            attributes,
            p_star,
            q_star,
            size_bounds,
            attr_bounds,
            out,
        } => {
            let report = eval_command(
                &truth,
                &pred,
                edges.as_deref(),
                attributes.as_deref(),
                GroupThresholds {
                    p_star,
                    q_star,
                    size_bounds: Some((size_bounds[0], size_bounds[1])),
                    attr_bounds: Some((attr_bounds[0], attr_bounds[1])),
                },
            )?;
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Bench {
            sizes,
            instances,
            k,
            m,
            seed,
            threads,
            out,
        } => {
            init_thread_pool(threads.or_else(env_threads).unwrap_or(1))?;
            let report = bench_scaling(&sizes, instances, k, m, seed)?;
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Export {
            report,
            format,
            out,
        } => {
            let format: ExportFormat = format.parse()?;
            let files = export_views(&report, format, out.as_deref())?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}

fn eval_command(
    truth: &Path,
    pred: &Path,
    edges: Option<&Path>,
    attributes: Option<&Path>,
    thresholds: GroupThresholds,
) -> Result<MetricReport> {
    // --pred may be a report.json; then the labels and edge list recorded
    // by the run are used.
    let (labels_path, edges_path): (PathBuf, PathBuf) =
        if pred.extension().is_some_and(|e| e == "json") {
            let report: RunReport = serde_json::from_str(&fs::read_to_string(pred)?)?;
            let run_dir = pred
                .parent()
                .ok_or_else(|| Error::validation("report path has no parent"))?;
            let edges_path = match edges {
                Some(e) => e.to_path_buf(),
                None => PathBuf::from(&report.config.edges),
            };
            (run_dir.join("predicted_labels.txt"), edges_path)
        } else {
            let edges = edges.ok_or_else(|| {
                Error::validation("--edges is required when --pred is a labels file")
            })?;
            (pred.to_path_buf(), edges.to_path_buf())
        };

    let (a, _) = load_edge_list(
        BufReader::new(fs::File::open(&edges_path)?),
        true,
    )?;
    let truth_labels = read_truth_labels(BufReader::new(fs::File::open(truth)?), a.id_map())?;
    let pred_labels = import_external_labels(
        BufReader::new(fs::File::open(&labels_path)?),
        a.id_map(),
    )?;
    let xb = match attributes {
        Some(path) => {
            let (x, _) = load_attributes(
                BufReader::new(fs::File::open(path)?),
                a.id_map(),
                UnknownNodePolicy::SkipAndCount,
            )?;
            Some(tinyblock_core::graphio::binarize(&x))
        }
        None => None,
    };
    if truth_labels.iter().all(|&l| l == 0) {
        warn!("truth has no coordinated nodes");
    }
    let quality = quality_score(
        &partition_from_labels(&truth_labels),
        &partition_from_labels(&pred_labels.labels),
    )? * 100.0;
    let coordinated: Vec<bool> = truth_labels.iter().map(|&l| l > 0).collect();
    let f1 = coordinated_f1(
        &coordinated,
        &pred_labels.labels,
        pred_labels.m,
        &a,
        xb.as_ref(),
        &thresholds,
    )?;
    Ok(MetricReport {
        quality,
        f1: f1.best,
        per_stage_f1: f1.per_stage,
        suspension_index: None,
        bot_influence_index: None,
    })
}
