//! End-to-end pipeline: ingest, transform, embed, cluster, flag, creed,
//! meso, and (when ground truth is supplied) evaluation, with per-stage
//! timings and byte-stable report files.

use std::fs;
use std::io::{BufReader, Cursor, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tinyblock_core::creed::{
    attribute_significance, cluster_engagement, group_creed, individual_engagement,
    significant_set,
};
use tinyblock_core::dense::DenseMatrix;
use tinyblock_core::embed::{embed, write_embedding, Embedding, VariantSpec};
use tinyblock_core::embed::svd::SvdOptions;
use tinyblock_core::error::{Error, Result};
use tinyblock_core::evalkit::{
    coordinated_f1, bot_influence_index, load_bot_csv, load_suspension_csv,
    partition_from_labels, quality_score, read_truth_labels, suspension_index,
};
use tinyblock_core::flag::{
    cluster_densities, elbow_select, flag_groups, import_external_labels, ClusterResult,
};
use tinyblock_core::graphio::{
    binarize, filter_isolated, load_attributes, load_edge_list, tfidf_transform,
    AttributeMatrix, IdMap, SparseAdjacency, TfidfMatrix, UnknownNodePolicy,
};
use tinyblock_core::kmeans::{minibatch_kmeans, KMeansParams};
use tinyblock_core::meso;
use tinyblock_core::report::{
    cluster_report, meso_report, AttributePhi, ClusterReportEntry, CreedReportEntry,
    IngestReport, MesoEntry, MetricReport, StageTiming,
};
use tinyblock_core::seeds::stage_seed;
use tinyblock_core::synthgen::write_labels;

use crate::config::{Mode, OnExisting, PipelineConfig, UnknownNodes, Weighting};

/// Attributes of one named input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputChecksum {
    pub path: String,
    pub sha256: String,
}

/// Complete record of one pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub input_checksums: Vec<InputChecksum>,
    pub ingest: IngestReport,
    pub p_star_used: f64,
    pub timings: Vec<StageTiming>,
    pub clusters: Vec<ClusterReportEntry>,
    pub creeds: Vec<CreedReportEntry>,
    pub meso: Vec<MesoEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
}

/// A finished run: where it lives and what it reported.
#[derive(Debug)]
pub struct RunArtifacts {
    pub outdir: PathBuf,
    pub report: RunReport,
}

/// Number of phi entries kept per cluster in the creed report.
const CREED_TOP_K: usize = 10;

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunArtifacts> {
    let resolved = config.resolve()?;
    let outdir = prepare_outdir(&resolved)?;
    let mut written: Vec<PathBuf> = Vec::new();
    match run_stages(&resolved, &outdir, &mut written) {
        Ok(report) => Ok(RunArtifacts { outdir, report }),
        Err(err) => {
            // Keep partial artifacts, renamed so they cannot be mistaken
            // for a completed run.
            for path in written {
                let mut partial = path.clone().into_os_string();
                partial.push(".partial");
                let _ = fs::rename(&path, PathBuf::from(partial));
            }
            Err(err)
        }
    }
}

fn prepare_outdir(config: &PipelineConfig) -> Result<PathBuf> {
    let base = PathBuf::from(&config.output);
    match config.on_existing {
        OnExisting::Fail => {
            if base.exists() {
                return Err(Error::validation(format!(
                    "output directory {} already exists (on_existing = fail)",
                    base.display()
                )));
            }
            fs::create_dir_all(&base)?;
            Ok(base)
        }
        OnExisting::Overwrite => {
            fs::create_dir_all(&base)?;
            Ok(base)
        }
        OnExisting::Suffix => {
            if !base.exists() {
                fs::create_dir_all(&base)?;
                return Ok(base);
            }
            for i in 1..10_000usize {
                let candidate = PathBuf::from(format!("{}-{i}", config.output));
                if !candidate.exists() {
                    fs::create_dir_all(&candidate)?;
                    return Ok(candidate);
                }
            }
            Err(Error::validation("no free suffixed output directory"))
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Timer {
    timings: Vec<StageTiming>,
}

impl Timer {
    fn new() -> Self {
        Timer {
            timings: Vec::new(),
        }
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.timings.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }
}

fn run_stages(
    config: &PipelineConfig,
    outdir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<RunReport> {
    let mut timer = Timer::new();
    let mut checksums = Vec::new();

    // Ingest.
    let (a, x, ingest) = timer.stage("ingest", || {
        let edge_bytes = fs::read(&config.edges)?;
        checksums.push(InputChecksum {
            path: config.edges.clone(),
            sha256: sha256_hex(&edge_bytes),
        });
        let (a, edge_stats) = load_edge_list(Cursor::new(&edge_bytes), !config.symmetrize)?;
        let attr_bytes = fs::read(&config.attributes)?;
        checksums.push(InputChecksum {
            path: config.attributes.clone(),
            sha256: sha256_hex(&attr_bytes),
        });
        let policy = match config.unknown_nodes {
            UnknownNodes::Skip => UnknownNodePolicy::SkipAndCount,
            UnknownNodes::Fail => UnknownNodePolicy::Fail,
        };
        let (x, _attr_stats) = load_attributes(Cursor::new(&attr_bytes), a.id_map(), policy)?;
        let (a, x, removed) = filter_isolated(&a, &x)?;
        let ingest = IngestReport {
            nodes: a.n(),
            edges: a.nnz(),
            dropped_self_loops: edge_stats.dropped_self_loops,
            deduped: edge_stats.deduped,
            removed_isolated: removed.len(),
            d: x.d(),
        };
        Ok((a, x, ingest))
    })?;

    // Transform.
    let (xb, xstar) = timer.stage("transform", || {
        let xb = binarize(&x);
        let (xstar, _) = tfidf_transform(&x);
        Ok((xb, xstar))
    })?;

    // Embed.
    let embedding = timer.stage("embed", || {
        embed_stage(config, &a, &x, &xb, &xstar)
    })?;
    write_artifact(outdir, "embedding.bin", written, |w| {
        write_embedding(&embedding.matrix, w)
    })?;

    // Cluster.
    let (labels, m) = timer.stage("cluster", || match &config.external_labels {
        Some(path) => {
            let file = fs::File::open(path)?;
            let parsed = import_external_labels(BufReader::new(file), a.id_map())?;
            Ok((parsed.labels, parsed.m))
        }
        None => {
            let m = config.m.expect("resolved");
            let params = KMeansParams {
                clusters: m,
                batch_size: config.batch_size,
                steps: config.steps,
                refine_epochs: config.refine_epochs,
                seed: stage_seed(config.seed, "kmeans"),
            };
            let fit = minibatch_kmeans(&embedding.matrix, &params)?;
            Ok((fit.labels, m))
        }
    })?;
    write_artifact(outdir, "predicted_labels.txt", written, |w| {
        write_labels(a.id_map(), &labels, w)
    })?;

    // Flag.
    let (result, p_star_used) = timer.stage("flag", || {
        let p_star = match config.thresholds.p_star {
            crate::config::PStarSetting::Value(v) => v,
            crate::config::PStarSetting::Auto(_) => {
                let mut densities: Vec<f64> = cluster_densities(&a, &labels, m)
                    .into_iter()
                    .map(|d| d.value)
                    .collect();
                densities.sort_by(|x, y| y.partial_cmp(x).expect("finite"));
                elbow_select(&densities)?.p_star
            }
        };
        let thresholds = config.thresholds.to_group_thresholds(p_star);
        let result = flag_groups(&labels, m, &a, &thresholds, config.thresholds.check_sizes)?;
        Ok((result, p_star))
    })?;

    // Creed.
    let creeds = timer.stage("creed", || {
        creed_stage(config, outdir, written, a.id_map(), &x, &xb, &xstar, &result)
    })?;

    // Meso.
    let meso_entries = timer.stage("meso", || {
        let matrix = meso::meso_interaction(&a, &result.labels, result.m)?;
        Ok(meso_report(&matrix))
    })?;

    // Metrics.
    let metrics = match &config.truth_labels {
        Some(path) => Some(timer.stage("metrics", || {
            metrics_stage(config, path, &a, &result, &mut checksums)
        })?),
        None => None,
    };

    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config: config.clone(),
        input_checksums: checksums,
        ingest,
        p_star_used,
        timings: timer.timings,
        clusters: cluster_report(&result),
        creeds,
        meso: meso_entries,
        metrics,
    };

    write_artifact(outdir, "cluster_report.json", written, |w| {
        write_json(w, &report.clusters)
    })?;
    write_artifact(outdir, "creed_report.json", written, |w| {
        write_json(w, &report.creeds)
    })?;
    write_artifact(outdir, "meso_report.json", written, |w| {
        write_json(w, &report.meso)
    })?;
    write_artifact(outdir, "report.json", written, |w| write_json(w, &report))?;
    Ok(report)
}

fn embed_stage(
    config: &PipelineConfig,
    a: &SparseAdjacency,
    x: &AttributeMatrix,
    xb: &AttributeMatrix,
    xstar: &TfidfMatrix,
) -> Result<Embedding> {
    let features = match config.weighting.expect("resolved") {
        Weighting::Binary => xb.to_f64(),
        Weighting::Counts => x.to_f64(),
        Weighting::Tfidf => xstar.weights().clone(),
    };
    let spec = VariantSpec {
        variant: config.variant.expect("resolved"),
        k: config.k.expect("resolved"),
    };
    let opts = SvdOptions {
        backend: config.svd_backend,
        ..SvdOptions::default()
    };
    embed(a, &features, &spec, stage_seed(config.seed, "embed"), &opts)
}

#[allow(clippy::too_many_arguments)]
fn creed_stage(
    config: &PipelineConfig,
    outdir: &Path,
    written: &mut Vec<PathBuf>,
    node_ids: &IdMap,
    x: &AttributeMatrix,
    xb: &AttributeMatrix,
    xstar: &TfidfMatrix,
    result: &ClusterResult,
) -> Result<Vec<CreedReportEntry>> {
    let scores = attribute_significance(xstar);
    let seed_names: Vec<String> = match &config.seed_attributes {
        Some(path) => fs::read_to_string(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect(),
        None => Vec::new(),
    };
    let top_k = config.top_k_significant.min(x.d());
    let (j_s, j_c) = significant_set(&scores, x, top_k, &seed_names);

    let engagement: Option<Vec<f64>> = if j_c.is_empty() {
        None
    } else {
        let fe = individual_engagement(xb, &j_c)?;
        write_artifact(outdir, "node_engagement.csv", written, |w| {
            writeln!(w, "node,engagement")?;
            for (i, v) in fe.iter().enumerate() {
                writeln!(w, "{},{v}", node_ids.name(i))?;
            }
            Ok(())
        })?;
        Some(fe)
    };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); result.m];
    for (i, &l) in result.labels.iter().enumerate() {
        members[l].push(i);
    }
    let names = x.attr_map();
    let mut entries = Vec::with_capacity(result.m);
    for (c, cluster_members) in members.iter().enumerate() {
        if cluster_members.is_empty() {
            entries.push(CreedReportEntry {
                cluster_id: c,
                creed: None,
                top_k_attributes: Vec::new(),
                engagement: None,
            });
            continue;
        }
        let ranking = group_creed(x, cluster_members, Some(&j_s), c)?;
        let top: Vec<AttributePhi> = ranking
            .entries
            .iter()
            .take(CREED_TOP_K)
            .map(|&(j, phi)| AttributePhi {
                name: names.name(j).to_string(),
                phi,
            })
            .collect();
        let cluster_engagement_value = match &engagement {
            Some(fe) => Some(cluster_engagement(fe, cluster_members)?),
            None => None,
        };
        entries.push(CreedReportEntry {
            cluster_id: c,
            creed: ranking.creed.map(|j| names.name(j).to_string()),
            top_k_attributes: top,
            engagement: cluster_engagement_value,
        });
    }
    Ok(entries)
}

fn metrics_stage(
    config: &PipelineConfig,
    truth_path: &str,
    a: &SparseAdjacency,
    result: &ClusterResult,
    checksums: &mut Vec<InputChecksum>,
) -> Result<MetricReport> {
    let truth_bytes = fs::read(truth_path)?;
    checksums.push(InputChecksum {
        path: truth_path.to_string(),
        sha256: sha256_hex(&truth_bytes),
    });
    let truth = read_truth_labels(Cursor::new(&truth_bytes), a.id_map())?;
    let quality = quality_score(
        &partition_from_labels(&truth),
        &partition_from_labels(&result.labels),
    )? * 100.0;
    let coordinated: Vec<bool> = truth.iter().map(|&l| l > 0).collect();
    let thresholds = config
        .thresholds
        .to_group_thresholds(match config.thresholds.p_star {
            crate::config::PStarSetting::Value(v) => v,
            crate::config::PStarSetting::Auto(_) => 0.01,
        });
    // Partition-style output: only the adjacency-side stages apply.
    let f1 = coordinated_f1(&coordinated, &result.labels, result.m, a, None, &thresholds)?;

    let flagged = result.flagged_nodes();
    let suspension = match &config.suspension {
        Some(path) if !flagged.is_empty() => {
            let file = fs::File::open(path)?;
            let suspended = load_suspension_csv(BufReader::new(file), a.id_map())?;
            Some(suspension_index(&suspended, &flagged)?)
        }
        Some(_) => {
            warn!("no flagged clusters; suspension index skipped");
            None
        }
        None => None,
    };
    let bot = match &config.bot_scores {
        Some(path) if !flagged.is_empty() => {
            let file = fs::File::open(path)?;
            let (scores, followers) = load_bot_csv(BufReader::new(file), a.id_map())?;
            Some(bot_influence_index(&scores, &followers, &flagged)?)
        }
        Some(_) => None,
        None => None,
    };
    Ok(MetricReport {
        quality,
        f1: f1.best,
        per_stage_f1: f1.per_stage,
        suspension_index: suspension,
        bot_influence_index: bot,
    })
}

fn write_artifact(
    outdir: &Path,
    name: &str,
    written: &mut Vec<PathBuf>,
    f: impl FnOnce(&mut dyn std::io::Write) -> Result<()>,
) -> Result<()> {
    let path = outdir.join(name);
    let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
    f(&mut file)?;
    file.flush()?;
    written.push(path);
    Ok(())
}

fn write_json<T: Serialize>(w: &mut dyn std::io::Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}
