//! Pairwise cluster interaction strengths.
//!
//! The off-diagonal interaction between clusters c and p sums the directed
//! edges both ways and normalizes by the product of the cluster sizes, so
//! the matrix is symmetric on directed graphs. Diagonal entries reuse the
//! induced ordered-pair density so they coincide with the flagging
//! estimator.

use crate::error::{Error, Result};
use crate::flag::cluster_densities;
use crate::graphio::SparseAdjacency;

/// Symmetric m x m interaction matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MesoMatrix {
    m: usize,
    values: Vec<f64>,
}

impl MesoMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, c: usize, p: usize) -> f64 {
        self.values[c * self.m + p]
    }

    /// Upper-triangular entries (including the diagonal) as (c, p, psi).
    pub fn upper_triangle(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.m * (self.m + 1) / 2);
        for c in 0..self.m {
            for p in c..self.m {
                out.push((c, p, self.get(c, p)));
            }
        }
        out
    }
}

/// Interaction strengths for all cluster pairs in one pass over the edges.
pub fn meso_interaction(
    a: &SparseAdjacency,
    labels: &[usize],
    m: usize,
) -> Result<MesoMatrix> {
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
    let mut directed = vec![0usize; m * m];
    for (s, d) in a.edges() {
        directed[labels[s] * m + labels[d]] += 1;
    }
    let mut values = vec![0.0f64; m * m];
    let diag = cluster_densities(a, labels, m);
    for c in 0..m {
        values[c * m + c] = diag[c].value;
        for p in (c + 1)..m {
            let both = directed[c * m + p] + directed[p * m + c];
            let denom = sizes[c] * sizes[p];
            let psi = if denom == 0 {
                0.0
            } else {
                both as f64 / denom as f64
            };
            values[c * m + p] = psi;
            values[p * m + c] = psi;
        }
    }
    Ok(MesoMatrix { m, values })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::graphio::IdMap;

    fn adjacency(n: usize, pairs: &[(usize, usize)]) -> SparseAdjacency {
        SparseAdjacency::from_pairs(n, pairs.to_vec(), IdMap::numeric(n))
            .unwrap()
            .0
    }

    /// O(n^2) scan over all node pairs.
    fn meso_oracle(a: &SparseAdjacency, labels: &[usize], m: usize) -> Vec<Vec<f64>> {
        let mut sizes = vec![0usize; m];
        for &l in labels {
            sizes[l] += 1;
        }
        let mut out = vec![vec![0.0; m]; m];
        for c in 0..m {
            for p in 0..m {
                let mut edges = 0usize;
                for i in 0..a.n() {
                    for j in 0..a.n() {
                        if labels[i] == c && labels[j] == p && i != j && a.has_edge(i, j) {
                            edges += 1;
                        }
                    }
                }
                out[c][p] = if c == p {
                    if sizes[c] < 2 {
                        0.0
                    } else {
                        edges as f64 / (sizes[c] * (sizes[c] - 1)) as f64
                    }
                } else {
                    let back = (0..a.n())
                        .flat_map(|i| (0..a.n()).map(move |j| (i, j)))
                        .filter(|&(i, j)| {
                            labels[i] == p && labels[j] == c && a.has_edge(i, j)
                        })
                        .count();
                    (edges + back) as f64 / (sizes[c] * sizes[p]) as f64
                };
            }
        }
        out
    }

    #[test]
    fn single_cross_edge_hand_count() {
        // I_c = {0, 1}, I_p = {2}, one edge 0 -> 2: psi = 1 / 2.
        let a = adjacency(3, &[(0, 2)]);
        let meso = meso_interaction(&a, &[0, 0, 1], 2).unwrap();
        assert!((meso.get(0, 1) - 0.5).abs() < 1e-15);
        assert_eq!(meso.get(0, 1), meso.get(1, 0));
    }

    #[test]
    fn disconnected_clusters_are_zero() {
        let a = adjacency(4, &[(0, 1), (2, 3)]);
        let meso = meso_interaction(&a, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(meso.get(0, 1), 0.0);
    }

    #[test]
    fn complete_bipartite_both_ways_gives_two() {
        let sizes = (2usize, 3usize);
        let mut pairs = Vec::new();
        for i in 0..sizes.0 {
            for j in sizes.0..sizes.0 + sizes.1 {
                pairs.push((i, j));
                pairs.push((j, i));
            }
        }
        let a = adjacency(5, &pairs);
        let labels = vec![0, 0, 1, 1, 1];
        let meso = meso_interaction(&a, &labels, 2).unwrap();
        assert!((meso.get(0, 1) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_matches_induced_density() {
        let a = adjacency(4, &[(0, 1), (1, 0), (0, 2)]);
        let labels = vec![0, 0, 0, 1];
        let meso = meso_interaction(&a, &labels, 2).unwrap();
        let d = crate::flag::induced_edge_probability(&a, &[0, 1, 2]);
        assert_eq!(meso.get(0, 0), d.value);
    }

    #[test]
    fn upper_triangle_layout() {
        let a = adjacency(3, &[(0, 1)]);
        let meso = meso_interaction(&a, &[0, 1, 2], 3).unwrap();
        let tri = meso.upper_triangle();
        assert_eq!(tri.len(), 6);
        assert_eq!((tri[0].0, tri[0].1), (0, 0));
        assert_eq!((tri[5].0, tri[5].1), (2, 2));
    }

    proptest! {
        #[test]
        fn matches_pair_scan_and_symmetry(
            edges in proptest::collection::vec((0usize..12, 0usize..12), 0..60),
            labels in proptest::collection::vec(0usize..3, 12),
        ) {
            let pairs: Vec<_> = edges.into_iter().filter(|(s, d)| s != d).collect();
            let a = adjacency(12, &pairs);
            let meso = meso_interaction(&a, &labels, 3).unwrap();
            let oracle = meso_oracle(&a, &labels, 3);
            for c in 0..3 {
                for p in 0..3 {
                    prop_assert_eq!(meso.get(c, p), meso.get(p, c));
                    prop_assert_eq!(meso.get(c, p), oracle[c][p]);
                }
            }
        }

        #[test]
        fn merge_bound_holds(
            edges in proptest::collection::vec((0usize..12, 0usize..12), 0..60),
        ) {
            // Merging clusters 0 and 1: psi(0 u 1, 2) stays within
            // max(psi(0,2), psi(1,2)) + psi(0,1).
            let pairs: Vec<_> = edges.into_iter().filter(|(s, d)| s != d).collect();
            let a = adjacency(12, &pairs);
            let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
            let meso = meso_interaction(&a, &labels, 3).unwrap();
            let merged_labels: Vec<usize> =
                labels.iter().map(|&l| if l == 1 { 0 } else { l / 2 }).collect();
            // merged: {0,1} -> 0, {2} -> 1
            let merged = meso_interaction(&a, &merged_labels, 2).unwrap();
            let bound = meso.get(0, 2).max(meso.get(1, 2)) + meso.get(0, 1);
            prop_assert!(merged.get(0, 1) <= bound + 1e-12);
        }
    }
}
