//! Cluster flagging: induced edge probability per cluster, threshold
//! conditions, elbow-based threshold selection, and external label import.

use std::collections::BTreeMap;
use std::io::BufRead;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphio::{IdMap, SparseAdjacency};

/// Minimum edge probabilities and optional size bounds for a cluster to be
/// flagged as coordinated. The attribute-side values (`q_star`, attribute
/// bounds) are computed for diagnostics and the evaluation protocol but
/// never gate flagging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupThresholds {
    pub p_star: f64,
    pub q_star: f64,
    pub size_bounds: Option<(usize, usize)>,
    pub attr_bounds: Option<(usize, usize)>,
}

impl Default for GroupThresholds {
    fn default() -> Self {
        GroupThresholds {
            p_star: 0.01,
            q_star: 0.01,
            size_bounds: Some((10, 80)),
            attr_bounds: Some((10, 80)),
        }
    }
}

impl GroupThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_star", self.p_star), ("q_star", self.q_star)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::validation(format!("{name} = {v} outside [0, 1]")));
            }
        }
        for (name, bounds) in [
            ("size_bounds", self.size_bounds),
            ("attr_bounds", self.attr_bounds),
        ] {
            if let Some((lo, hi)) = bounds {
                if lo > hi {
                    return Err(Error::validation(format!(
                        "{name} lower bound {lo} exceeds upper bound {hi}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Empirical induced edge probability of a node subset: present directed
/// edges over the `s * (s - 1)` ordered pairs. Undefined (zero, flagged)
/// for fewer than two members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InducedDensity {
    pub value: f64,
    pub defined: bool,
}

pub fn induced_edge_probability(a: &SparseAdjacency, members: &[usize]) -> InducedDensity {
    let s = members.len();
    if s < 2 {
        return InducedDensity {
            value: 0.0,
            defined: false,
        };
    }
    let mut inside = vec![false; a.n()];
    for &i in members {
        inside[i] = true;
    }
    let mut edges = 0usize;
    for &i in members {
        for &j in a.out_neighbors(i) {
            if inside[j] {
                edges += 1;
            }
        }
    }
    InducedDensity {
        value: edges as f64 / (s * (s - 1)) as f64,
        defined: true,
    }
}

/// Induced densities of every cluster in one pass over the edges.
pub fn cluster_densities(a: &SparseAdjacency, labels: &[usize], m: usize) -> Vec<InducedDensity> {
    let mut sizes = vec![0usize; m];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut inside_edges = vec![0usize; m];
    for (s, d) in a.edges() {
        if labels[s] == labels[d] {
            inside_edges[labels[s]] += 1;
        }
    }
    (0..m)
        .map(|c| {
            if sizes[c] < 2 {
                InducedDensity {
                    value: 0.0,
                    defined: false,
                }
            } else {
                InducedDensity {
                    value: inside_edges[c] as f64 / (sizes[c] * (sizes[c] - 1)) as f64,
                    defined: true,
                }
            }
        })
        .collect()
}

/// Per-cluster sizes, densities, coordinated flags, and density ranking.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub m: usize,
    pub sizes: Vec<usize>,
    pub densities: Vec<f64>,
    pub flagged: Vec<bool>,
    /// Cluster ids ordered by density descending, ties toward the lower id.
    pub ranking: Vec<usize>,
}

impl ClusterResult {
    pub fn flagged_nodes(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.flagged[self.labels[i]])
            .collect()
    }
}

/// Flag clusters whose induced edge probability reaches `p_star` and,
/// when `check_sizes` is set, whose size lies within the bounds.
pub fn flag_groups(
    labels: &[usize],
    m: usize,
    a: &SparseAdjacency,
    thresholds: &GroupThresholds,
    check_sizes: bool,
) -> Result<ClusterResult> {
    thresholds.validate()?;
    if labels.len() != a.n() {
        return Err(Error::contract(format!(
            "{} labels for {} nodes",
            labels.len(),
            a.n()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= m) {
        return Err(Error::contract(format!("label {bad} outside 0..{m}")));
    }
    let mut sizes = vec![0usize; m];
    for &l in labels {
        sizes[l] += 1;
    }
    let densities = cluster_densities(a, labels, m);
    let flagged: Vec<bool> = (0..m)
        .map(|c| {
            let dense_enough = densities[c].value >= thresholds.p_star;
            let size_ok = match (check_sizes, thresholds.size_bounds) {
                (true, Some((lo, hi))) => sizes[c] >= lo && sizes[c] <= hi,
                _ => true,
            };
            dense_enough && size_ok
        })
        .collect();
    let mut ranking: Vec<usize> = (0..m).collect();
    ranking.sort_by(|&x, &y| {
        densities[y]
            .value
            .partial_cmp(&densities[x].value)
            .expect("finite densities")
            .then(x.cmp(&y))
    });
    Ok(ClusterResult {
        labels: labels.to_vec(),
        m,
        sizes,
        densities: densities.into_iter().map(|d| d.value).collect(),
        flagged,
        ranking,
    })
}

/// Elbow pick over densities sorted descending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElbowSelection {
    pub p_star: f64,
    pub index: usize,
    /// False when the maximum-distance point is tied or degenerate.
    pub clear: bool,
}

/// Select the threshold at the point of maximum perpendicular distance
/// from the chord joining the first and last points, both axes normalized
/// to the unit square. Ties break toward the larger density.
pub fn elbow_select(densities: &[f64]) -> Result<ElbowSelection> {
    let len = densities.len();
    if len < 3 {
        return Err(Error::contract(
            "elbow selection needs at least 3 clusters; set the threshold manually",
        ));
    }
    if densities.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::contract(
            "elbow selection expects densities sorted in descending order",
        ));
    }
    let first = densities[0];
    let last = densities[len - 1];
    let span = first - last;
    if span <= 0.0 {
        warn!("all cluster densities equal; no clear elbow");
        return Ok(ElbowSelection {
            p_star: first,
            index: 0,
            clear: false,
        });
    }
    // Distance from the chord (0, 1) -> (1, 0) is |x + y - 1| / sqrt(2);
    // the constant factor cannot change the argmax.
    let mut best_idx = 0usize;
    let mut best = f64::NEG_INFINITY;
    let mut distances = Vec::with_capacity(len);
    for (i, &d) in densities.iter().enumerate() {
        let x = i as f64 / (len - 1) as f64;
        let y = (d - last) / span;
        let dist = (x + y - 1.0).abs();
        distances.push(dist);
        if dist > best {
            best = dist;
            best_idx = i;
        }
    }
    let ties = distances.iter().filter(|&&d| (best - d) <= 1e-12).count();
    let clear = ties == 1 && best > 1e-12;
    if !clear {
        warn!("no clear elbow in the density curve; picked the largest-density tie");
    }
    Ok(ElbowSelection {
        p_star: densities[best_idx],
        index: best_idx,
        clear,
    })
}

/// Labels imported from an external clustering run.
#[derive(Debug, Clone)]
pub struct ExternalLabels {
    pub labels: Vec<usize>,
    pub m: usize,
    /// Nodes whose raw label was -1, mapped to a dedicated background
    /// cluster appended after the real ones.
    pub noise_count: usize,
}

/// Parse `node<ws>label` lines over an existing node dictionary. Raw
/// labels are arbitrary integers; -1 marks noise. Every node in the graph
/// must appear; labels for unknown nodes are ignored.
pub fn import_external_labels<R: BufRead>(reader: R, id_map: &IdMap) -> Result<ExternalLabels> {
    let n = id_map.len();
    let mut raw: Vec<Option<i64>> = vec![None; n];
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
        let label: i64 = label
            .parse()
            .map_err(|_| Error::parse(lineno + 1, format!("label {label:?} is not an integer")))?;
        if let Some(idx) = id_map.get(node) {
            raw[idx] = Some(label);
        }
    }
    let missing: Vec<String> = (0..n)
        .filter(|&i| raw[i].is_none())
        .map(|i| id_map.name(i).to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingNodes { missing });
    }

    let mut dense: BTreeMap<i64, usize> = BTreeMap::new();
    for label in raw.iter().flatten() {
        if *label != -1 {
            let next = dense.len();
            dense.entry(*label).or_insert(next);
        }
    }
    let real = dense.len();
    let noise_count = raw.iter().filter(|l| **l == Some(-1)).count();
    let m = real + usize::from(noise_count > 0);
    let labels = raw
        .into_iter()
        .map(|l| match l.expect("coverage checked") {
            -1 => real,
            other => dense[&other],
        })
        .collect();
    Ok(ExternalLabels {
        labels,
        m,
        noise_count,
    })
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;

    use proptest::prelude::*;

    use super::*;
    use crate::graphio::IdMap;

    fn adjacency(n: usize, pairs: &[(usize, usize)]) -> SparseAdjacency {
        SparseAdjacency::from_pairs(n, pairs.to_vec(), IdMap::numeric(n))
            .unwrap()
            .0
    }

    /// O(s^2) ordered-pair scan used as the density oracle.
    fn density_oracle(a: &SparseAdjacency, members: &[usize]) -> f64 {
        if members.len() < 2 {
            return 0.0;
        }
        let mut edges = 0usize;
        for &i in members {
            for &j in members {
                if i != j && a.has_edge(i, j) {
                    edges += 1;
                }
            }
        }
        edges as f64 / (members.len() * (members.len() - 1)) as f64
    }

    #[test]
    fn density_hand_example() {
        // Members {1, 2, 3} with edges (1,2), (2,1), (1,3): 3 of 6 pairs.
        let a = adjacency(4, &[(1, 2), (2, 1), (1, 3)]);
        let d = induced_edge_probability(&a, &[1, 2, 3]);
        assert!(d.defined);
        assert!((d.value - 0.5).abs() < 1e-15);
        assert_eq!(d.value, density_oracle(&a, &[1, 2, 3]));
    }

    #[test]
    fn density_of_clique_is_one() {
        let pairs: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        let a = adjacency(4, &pairs);
        assert_eq!(induced_edge_probability(&a, &[0, 1, 2, 3]).value, 1.0);
    }

    #[test]
    fn density_of_singleton_is_undefined() {
        let a = adjacency(2, &[(0, 1)]);
        let d = induced_edge_probability(&a, &[0]);
        assert!(!d.defined);
        assert_eq!(d.value, 0.0);
        assert!(!induced_edge_probability(&a, &[]).defined);
    }

    #[test]
    fn flagging_applies_density_and_size_conditions() {
        // Three clusters shaped to densities [0.3, 0.06, ~0] and sizes
        // [15, 40, 45]: with p* = 0.05 and bounds [10, 80] the first two
        // are flagged.
        let mut labels = Vec::new();
        labels.extend(std::iter::repeat(0usize).take(15));
        labels.extend(std::iter::repeat(1usize).take(40));
        labels.extend(std::iter::repeat(2usize).take(45));
        let mut pairs = Vec::new();
        // 63 in-cluster edges over 15*14 ordered pairs = 0.3.
        let mut count = 0;
        'outer0: for i in 0..15 {
            for j in 0..15 {
                if i != j {
                    pairs.push((i, j));
                    count += 1;
                    if count == 63 {
                        break 'outer0;
                    }
                }
            }
        }
        // 94 in-cluster edges over 40*39 = 0.0602...
        count = 0;
        'outer1: for i in 15..55 {
            for j in 15..55 {
                if i != j {
                    pairs.push((i, j));
                    count += 1;
                    if count == 94 {
                        break 'outer1;
                    }
                }
            }
        }
        pairs.push((55, 56));
        let a = adjacency(100, &pairs);
        let thr = GroupThresholds {
            p_star: 0.05,
            ..GroupThresholds::default()
        };
        let result = flag_groups(&labels, 3, &a, &thr, true).unwrap();
        assert_eq!(result.flagged, vec![true, true, false]);
        assert_eq!(result.ranking, vec![0, 1, 2]);
        assert_eq!(result.sizes, vec![15, 40, 45]);
    }

    #[test]
    fn zero_threshold_without_size_check_flags_everything() {
        let a = adjacency(6, &[(0, 1), (2, 3)]);
        let labels = vec![0, 0, 1, 1, 2, 2];
        let thr = GroupThresholds {
            p_star: 0.0,
            ..GroupThresholds::default()
        };
        let result = flag_groups(&labels, 3, &a, &thr, false).unwrap();
        assert!(result.flagged.iter().all(|&f| f));
    }

    #[test]
    fn ranking_breaks_ties_toward_lower_id() {
        let a = adjacency(4, &[(0, 1), (1, 0), (2, 3), (3, 2)]);
        let labels = vec![0, 0, 1, 1];
        let result = flag_groups(&labels, 2, &a, &GroupThresholds::default(), false).unwrap();
        assert_eq!(result.ranking, vec![0, 1]);
    }

    #[test]
    fn flags_invariant_under_cluster_permutation() {
        let a = adjacency(6, &[(0, 1), (1, 0), (0, 2), (4, 5)]);
        let labels = vec![0, 0, 0, 1, 2, 2];
        let thr = GroupThresholds {
            p_star: 0.1,
            size_bounds: Some((1, 4)),
            ..GroupThresholds::default()
        };
        let base = flag_groups(&labels, 3, &a, &thr, true).unwrap();
        // Swap cluster ids 0 and 2.
        let perm: Vec<usize> = labels.iter().map(|&l| [2, 1, 0][l]).collect();
        let permuted = flag_groups(&perm, 3, &a, &thr, true).unwrap();
        for node in 0..6 {
            assert_eq!(
                base.flagged[base.labels[node]],
                permuted.flagged[permuted.labels[node]]
            );
        }
    }

    #[test]
    fn elbow_hand_example() {
        let sel = elbow_select(&[1.0, 0.9, 0.1, 0.05, 0.04]).unwrap();
        assert_eq!(sel.index, 2);
        assert!((sel.p_star - 0.1).abs() < 1e-15);
        assert!(sel.clear);
    }

    #[test]
    fn elbow_brute_force_argmax_agrees() {
        let densities = [0.9, 0.5, 0.2, 0.1, 0.08, 0.02];
        let sel = elbow_select(&densities).unwrap();
        // Independent normalized-distance computation.
        let len = densities.len();
        let span = densities[0] - densities[len - 1];
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &d) in densities.iter().enumerate() {
            let x = i as f64 / (len - 1) as f64;
            let y = (d - densities[len - 1]) / span;
            let dist = (x + y - 1.0).abs();
            if dist > best.1 {
                best = (i, dist);
            }
        }
        assert_eq!(sel.index, best.0);
    }

    #[test]
    fn elbow_linear_decay_is_degenerate() {
        let sel = elbow_select(&[0.5, 0.4, 0.3, 0.2, 0.1]).unwrap();
        assert!(!sel.clear);
        assert_eq!(sel.index, 0);
        assert!((sel.p_star - 0.5).abs() < 1e-15);
    }

    #[test]
    fn elbow_needs_three_points() {
        assert!(elbow_select(&[0.5, 0.1]).is_err());
    }

    #[test]
    fn external_labels_single_cluster() {
        let ids = IdMap::numeric(3);
        let parsed =
            import_external_labels(Cursor::new("0 0\n1 0\n2 0\n"), &ids).unwrap();
        assert_eq!(parsed.m, 1);
        assert_eq!(parsed.labels, vec![0, 0, 0]);
    }

    #[test]
    fn external_labels_noise_becomes_background() {
        let ids = IdMap::numeric(4);
        let parsed =
            import_external_labels(Cursor::new("0 7\n1 -1\n2 7\n3 9\n"), &ids).unwrap();
        assert_eq!(parsed.m, 3);
        assert_eq!(parsed.noise_count, 1);
        assert_eq!(parsed.labels, vec![0, 2, 0, 1]);
    }

    #[test]
    fn external_labels_missing_nodes_listed() {
        let ids = IdMap::numeric(3);
        match import_external_labels(Cursor::new("0 1\n"), &ids) {
            Err(Error::MissingNodes { missing }) => {
                assert_eq!(missing, vec!["1".to_string(), "2".to_string()]);
            }
            other => panic!("expected MissingNodes, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn density_matches_pair_scan(
            edges in proptest::collection::vec((0usize..30, 0usize..30), 0..120),
            member_mask in proptest::collection::vec(proptest::bool::ANY, 30),
        ) {
            let pairs: Vec<_> = edges.into_iter().filter(|(s, d)| s != d).collect();
            let a = adjacency(30, &pairs);
            let members: Vec<usize> =
                (0..30).filter(|&i| member_mask[i]).collect();
            let fast = induced_edge_probability(&a, &members);
            prop_assert_eq!(fast.value, density_oracle(&a, &members));
        }

        #[test]
        fn raising_p_star_never_adds_flags(
            edges in proptest::collection::vec((0usize..20, 0usize..20), 0..80),
            labels in proptest::collection::vec(0usize..4, 20),
            lo in 0.0f64..0.5,
            delta in 0.0f64..0.5,
        ) {
            let pairs: Vec<_> = edges.into_iter().filter(|(s, d)| s != d).collect();
            let a = adjacency(20, &pairs);
            let low = GroupThresholds { p_star: lo, ..GroupThresholds::default() };
            let high = GroupThresholds { p_star: lo + delta, ..GroupThresholds::default() };
            let fl = flag_groups(&labels, 4, &a, &low, false).unwrap();
            let fh = flag_groups(&labels, 4, &a, &high, false).unwrap();
            for c in 0..4 {
                prop_assert!(!(fh.flagged[c] && !fl.flagged[c]));
            }
        }
    }
}
