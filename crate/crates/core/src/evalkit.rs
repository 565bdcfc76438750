//! Scoring of detection output: partition Quality, coordinated-node F1
//! via cumulative condition stages, and the real-data proxy indices.

use std::io::BufRead;

use log::warn;

use crate::error::{Error, Result};
use crate::flag::{cluster_densities, GroupThresholds};
use crate::graphio::{AttributeMatrix, IdMap, SparseAdjacency};

/// Group the node ids by label, dropping empty clusters. Members are
/// sorted; clusters keep ascending label order.
pub fn partition_from_labels(labels: &[usize]) -> Vec<Vec<usize>> {
    let m = labels.iter().copied().max().map_or(0, |x| x + 1);
    let mut clusters = vec![Vec::new(); m];
    for (i, &l) in labels.iter().enumerate() {
        clusters[l].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    clusters
}

fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    // Sorted-slice intersection.
    let mut inter = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Mean over truth clusters of the best Jaccard overlap with any inferred
/// cluster, in [0, 1]. Cluster members must be sorted node ids.
pub fn quality_score(truth: &[Vec<usize>], inferred: &[Vec<usize>]) -> Result<f64> {
    if truth.is_empty() || inferred.is_empty() {
        return Err(Error::contract("quality of an empty partition"));
    }
    let total: f64 = truth
        .iter()
        .map(|t| {
            inferred
                .iter()
                .map(|u| jaccard(t, u))
                .fold(0.0f64, f64::max)
        })
        .sum();
    Ok(total / truth.len() as f64)
}

/// Binary F1 in percent.
pub fn f1_binary(truth: &[bool], predicted: &[bool]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    if 2 * tp + fp + fn_ == 0 {
        return 0.0;
    }
    100.0 * 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// Attribute-side condition estimate for one cluster: the dominant shared
/// attribute set (attributes used by at least two members, by in-cluster
/// support, truncated to the upper size bound) and the mean presence
/// density over it.
///
/// The underlying generative parameters are not inferred; this empirical
/// stand-in is isolated here so it can be swapped out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttrDiagnostics {
    pub shared_set_size: usize,
    pub mean_density: f64,
    pub passes_size: bool,
    pub passes_density: bool,
}

impl AttrDiagnostics {
    pub fn passes(&self) -> bool {
        self.passes_size && self.passes_density
    }
}

pub fn attribute_condition(
    xb: &AttributeMatrix,
    members: &[usize],
    thresholds: &GroupThresholds,
) -> AttrDiagnostics {
    let mut support: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for &i in members {
        let (cols, _) = xb.counts().row(i);
        for &j in cols {
            *support.entry(j).or_insert(0) += 1;
        }
    }
    let mut shared: Vec<(usize, usize)> = support
        .into_iter()
        .filter(|&(_, count)| count >= 2)
        .collect();
    shared.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if let Some((_, hi)) = thresholds.attr_bounds {
        shared.truncate(hi);
    }
    let t_hat = shared.len();
    let used: usize = shared.iter().map(|&(_, count)| count).sum();
    let mean_density = if t_hat == 0 || members.is_empty() {
        0.0
    } else {
        used as f64 / (members.len() * t_hat) as f64
    };
    let passes_size = match thresholds.attr_bounds {
        Some((lo, hi)) => t_hat >= lo && t_hat <= hi,
        None => t_hat > 0,
    };
    AttrDiagnostics {
        shared_set_size: t_hat,
        mean_density,
        passes_size,
        passes_density: mean_density >= thresholds.q_star,
    }
}

/// Best F1 across the cumulative condition stages.
#[derive(Debug, Clone, PartialEq)]
pub struct F1Outcome {
    /// Percent.
    pub best: f64,
    /// Percent per stage: edge probability; plus size bounds; plus the
    /// attribute-side conditions when an attribute matrix is supplied.
    pub per_stage: Vec<f64>,
}

/// Score the inferred clustering against the binary coordinated truth by
/// sequentially tightening the flagging conditions and keeping the best F1:
/// (1) edge probability alone, (2) plus the node-size bounds, (3) plus the
/// attribute-side conditions when `xb` is given.
pub fn coordinated_f1(
    truth: &[bool],
    labels: &[usize],
    m: usize,
    a: &SparseAdjacency,
    xb: Option<&AttributeMatrix>,
    thresholds: &GroupThresholds,
) -> Result<F1Outcome> {
    thresholds.validate()?;
    if truth.len() != a.n() || labels.len() != a.n() {
        return Err(Error::contract(
            "truth and label vectors must cover every node",
        ));
    }
    if truth.iter().all(|&t| !t) {
        warn!("degenerate truth: no coordinated nodes; F1 is 0");
    }
    let densities = cluster_densities(a, labels, m);
    let mut sizes = vec![0usize; m];
    for &l in labels {
        sizes[l] += 1;
    }
    let members: Vec<Vec<usize>> = {
        let mut out = vec![Vec::new(); m];
        for (i, &l) in labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    };

    let stage1: Vec<bool> = (0..m)
        .map(|c| densities[c].value >= thresholds.p_star)
        .collect();
    let stage2: Vec<bool> = (0..m)
        .map(|c| {
            stage1[c]
                && match thresholds.size_bounds {
                    Some((lo, hi)) => sizes[c] >= lo && sizes[c] <= hi,
                    None => true,
                }
        })
        .collect();
    let mut stages = vec![stage1, stage2];
    if let Some(xb) = xb {
        let stage3: Vec<bool> = (0..m)
            .map(|c| {
                stages[1][c] && attribute_condition(xb, &members[c], thresholds).passes()
            })
            .collect();
        stages.push(stage3);
    }

    let per_stage: Vec<f64> = stages
        .iter()
        .map(|flags| {
            let predicted: Vec<bool> = labels.iter().map(|&l| flags[l]).collect();
            f1_binary(truth, &predicted)
        })
        .collect();
    let best = per_stage.iter().copied().fold(0.0f64, f64::max);
    Ok(F1Outcome { best, per_stage })
}

/// In-set suspension rate over the global rate.
pub fn suspension_index(suspended: &[bool], members: &[usize]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::contract("suspension index of an empty set"));
    }
    let global = suspended.iter().filter(|&&s| s).count();
    if global == 0 {
        return Err(Error::validation(
            "suspension index undefined: no suspended accounts at all",
        ));
    }
    let global_rate = global as f64 / suspended.len() as f64;
    let in_rate =
        members.iter().filter(|&&i| suspended[i]).count() as f64 / members.len() as f64;
    Ok(in_rate / global_rate)
}

/// Mean of `bot_score * ln(1 + followers)` over the member set.
pub fn bot_influence_index(
    bot_scores: &[f64],
    followers: &[i64],
    members: &[usize],
) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::contract("bot influence of an empty set"));
    }
    if let Some(&bad) = followers.iter().find(|&&f| f < 0) {
        return Err(Error::validation(format!(
            "negative follower count {bad}"
        )));
    }
    let total: f64 = members
        .iter()
        .map(|&i| bot_scores[i] * (1.0 + followers[i] as f64).ln())
        .sum();
    Ok(total / members.len() as f64)
}

/// Ground-truth group labels, `node<ws>label` with nonnegative labels.
/// Every node in the graph must be covered; labels for nodes no longer in
/// the graph (e.g. filtered out as isolated) are ignored.
pub fn read_truth_labels<R: BufRead>(reader: R, id_map: &IdMap) -> Result<Vec<usize>> {
    let n = id_map.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (node, label) = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::parse(
                    lineno + 1,
                    format!("expected node and label, got {line:?}"),
                ))
            }
        };
        let label: usize = label.parse().map_err(|_| {
            Error::parse(lineno + 1, format!("label {label:?} is not a nonnegative integer"))
        })?;
        if let Some(idx) = id_map.get(node) {
            labels[idx] = Some(label);
        }
    }
    let missing: Vec<String> = (0..n)
        .filter(|&i| labels[i].is_none())
        .map(|i| id_map.name(i).to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingNodes { missing });
    }
    Ok(labels.into_iter().map(|l| l.expect("covered")).collect())
}

fn split_csv_line(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// `node,suspended(0/1)` rows; nodes absent from the file count as not
/// suspended. A header row is skipped.
pub fn load_suspension_csv<R: BufRead>(reader: R, id_map: &IdMap) -> Result<Vec<bool>> {
    let mut out = vec![false; id_map.len()];
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_csv_line(line);
        if fields.len() != 2 {
            return Err(Error::parse(lineno + 1, "expected node,suspended"));
        }
        let flag = match fields[1].parse::<u8>() {
            Ok(0) => false,
            Ok(1) => true,
            _ if lineno == 0 => continue, // header
            _ => return Err(Error::parse(lineno + 1, "suspended must be 0 or 1")),
        };
        if let Some(idx) = id_map.get(fields[0]) {
            out[idx] = flag;
        }
    }
    Ok(out)
}

/// `node,bot_score,followers` rows; nodes absent from the file default to
/// score 0 with 0 followers. A header row is skipped.
pub fn load_bot_csv<R: BufRead>(reader: R, id_map: &IdMap) -> Result<(Vec<f64>, Vec<i64>)> {
    let mut scores = vec![0.0f64; id_map.len()];
    let mut followers = vec![0i64; id_map.len()];
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_csv_line(line);
        if fields.len() != 3 {
            return Err(Error::parse(lineno + 1, "expected node,bot_score,followers"));
        }
        let parsed = (fields[1].parse::<f64>(), fields[2].parse::<i64>());
        let (score, count) = match parsed {
            (Ok(s), Ok(f)) => (s, f),
            _ if lineno == 0 => continue, // header
            _ => {
                return Err(Error::parse(
                    lineno + 1,
                    "bot_score must be a float and followers an integer",
                ))
            }
        };
        if count < 0 {
            return Err(Error::validation(format!(
                "negative follower count {count} at line {}",
                lineno + 1
            )));
        }
        if let Some(idx) = id_map.get(fields[0]) {
            scores[idx] = score;
            followers[idx] = count;
        }
    }
    Ok((scores, followers))
}
