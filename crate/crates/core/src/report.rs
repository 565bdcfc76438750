//! Machine-readable report records. Field order here fixes the JSON key
//! order, keeping report files byte-stable across runs.

use serde::{Deserialize, Serialize};

use crate::flag::ClusterResult;
use crate::meso::MesoMatrix;

/// Ingest summary emitted by the pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub nodes: usize,
    pub edges: usize,
    pub dropped_self_loops: usize,
    pub deduped: usize,
    pub removed_isolated: usize,
    pub d: usize,
}

/// One row of the cluster report, ranked by induced edge probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReportEntry {
    pub cluster_id: usize,
    pub size: usize,
    pub edge_probability: f64,
    pub flagged: bool,
    pub rank: usize,
}

pub fn cluster_report(result: &ClusterResult) -> Vec<ClusterReportEntry> {
    result
        .ranking
        .iter()
        .enumerate()
        .map(|(rank, &c)| ClusterReportEntry {
            cluster_id: c,
            size: result.sizes[c],
            edge_probability: result.densities[c],
            flagged: result.flagged[c],
            rank,
        })
        .collect()
}

/// Attribute name with its discrepancy score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePhi {
    pub name: String,
    pub phi: f64,
}

/// One cluster's creed summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreedReportEntry {
    pub cluster_id: usize,
    pub creed: Option<String>,
    pub top_k_attributes: Vec<AttributePhi>,
    pub engagement: Option<f64>,
}

/// One upper-triangular cell of the interaction matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MesoEntry {
    pub c: usize,
    pub p: usize,
    pub psi: f64,
}

pub fn meso_report(meso: &MesoMatrix) -> Vec<MesoEntry> {
    meso.upper_triangle()
        .into_iter()
        .map(|(c, p, psi)| MesoEntry { c, p, psi })
        .collect()
}

/// Detection metrics against supplied ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Percent scale.
    pub quality: f64,
    /// Percent scale; best stage.
    pub f1: f64,
    pub per_stage_f1: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suspension_index: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bot_influence_index: Option<f64>,
}

/// Wall-clock seconds for one pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}
