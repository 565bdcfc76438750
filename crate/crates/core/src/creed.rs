//! Per-cluster attribute signatures: significance scores, the significant
//! attribute set, the local-vs-global usage discrepancy ranking whose
//! argmax is the group creed, and engagement scores.

use std::collections::HashSet;

use log::warn;

use crate::error::{Error, Result};
use crate::graphio::{AttributeMatrix, TfidfMatrix};

/// Mean TF-IDF weight of each attribute across all users.
pub fn attribute_significance(xstar: &TfidfMatrix) -> Vec<f64> {
    let n = xstar.n().max(1) as f64;
    let mut scores = vec![0.0f64; xstar.d()];
    for (_, c, v) in xstar.weights().iter() {
        scores[c] += v;
    }
    for s in &mut scores {
        *s /= n;
    }
    scores
}

/// Top-`top_k` attributes by significance (`J_S`, ties broken by
/// lexicographic name) and its intersection with the case-insensitive
/// closure of the seed names (`J_C`). Both keep score order.
pub fn significant_set(
    scores: &[f64],
    x: &AttributeMatrix,
    top_k: usize,
    seed_names: &[String],
) -> (Vec<usize>, Vec<usize>) {
    let names = x.attr_map();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then_with(|| names.name(a).cmp(names.name(b)))
    });
    order.truncate(top_k);
    let folded: HashSet<String> = seed_names.iter().map(|s| s.to_lowercase()).collect();
    let canadian: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&j| folded.contains(&names.name(j).to_lowercase()))
        .collect();
    (order, canadian)
}

/// Attribute ranking for one cluster by local-vs-global usage discrepancy.
#[derive(Debug, Clone)]
pub struct CreedRanking {
    pub cluster_id: usize,
    /// (attribute index, phi) sorted by phi descending, ties by name.
    pub entries: Vec<(usize, f64)>,
    /// Argmax attribute; `None` when the cluster has no restricted usage.
    pub creed: Option<usize>,
    /// Whether the ranking ran over a restricted attribute set.
    pub restricted: bool,
}

/// phi(j) = in-cluster usage share of `j` minus its global usage share,
/// both over the restricted attribute set (all attributes when `restrict`
/// is `None`). Shares are frequency shares of raw counts.
pub fn group_creed(
    x: &AttributeMatrix,
    members: &[usize],
    restrict: Option<&[usize]>,
    cluster_id: usize,
) -> Result<CreedRanking> {
    if members.is_empty() {
        return Err(Error::contract("creed of an empty cluster"));
    }
    let d = x.d();
    let in_restrict: Option<Vec<bool>> = restrict.map(|r| {
        let mut mask = vec![false; d];
        for &j in r {
            mask[j] = true;
        }
        mask
    });
    let allowed = |j: usize| in_restrict.as_ref().map_or(true, |m| m[j]);

    let mut global = vec![0.0f64; d];
    let mut global_total = 0.0f64;
    for (_, j, v) in x.counts().iter() {
        if allowed(j) {
            global[j] += f64::from(v);
            global_total += f64::from(v);
        }
    }
    if global_total <= 0.0 {
        return Err(Error::EmptyInput(
            "no attribute usage over the restricted set".to_string(),
        ));
    }

    let mut member_mask = vec![false; x.n()];
    for &i in members {
        member_mask[i] = true;
    }
    let mut local = vec![0.0f64; d];
    let mut local_total = 0.0f64;
    for &i in members {
        let (cols, vals) = x.counts().row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if allowed(j) {
                local[j] += f64::from(v);
                local_total += f64::from(v);
            }
        }
    }
    if local_total <= 0.0 {
        warn!("cluster {cluster_id} has no usage over the restricted attribute set; empty creed");
        return Ok(CreedRanking {
            cluster_id,
            entries: Vec::new(),
            creed: None,
            restricted: restrict.is_some(),
        });
    }

    let names = x.attr_map();
    let columns: Vec<usize> = match restrict {
        Some(r) => r.to_vec(),
        None => (0..d).collect(),
    };
    let mut entries: Vec<(usize, f64)> = columns
        .into_iter()
        .map(|j| (j, local[j] / local_total - global[j] / global_total))
        .collect();
    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite phi")
            .then_with(|| names.name(a.0).cmp(names.name(b.0)))
    });
    Ok(CreedRanking {
        cluster_id,
        creed: entries.first().map(|&(j, _)| j),
        entries,
        restricted: restrict.is_some(),
    })
}

/// Fraction of the given attribute set each node has used at least once.
pub fn individual_engagement(xb: &AttributeMatrix, attrs: &[usize]) -> Result<Vec<f64>> {
    if attrs.is_empty() {
        return Err(Error::contract(
            "individual engagement needs a nonempty attribute set",
        ));
    }
    let mut wanted = vec![false; xb.d()];
    for &j in attrs {
        wanted[j] = true;
    }
    let total = attrs.len() as f64;
    Ok((0..xb.n())
        .map(|i| {
            let (cols, _) = xb.counts().row(i);
            let used = cols.iter().filter(|&&j| wanted[j]).count();
            used as f64 / total
        })
        .collect())
}

/// Scaled average of individual engagements over the member set:
/// `ln(size) * mean`. Zero for singletons.
pub fn cluster_engagement(fe: &[f64], members: &[usize]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::contract("engagement of an empty cluster"));
    }
    let mean = members.iter().map(|&i| fe[i]).sum::<f64>() / members.len() as f64;
    Ok((members.len() as f64).ln() * mean)
}
