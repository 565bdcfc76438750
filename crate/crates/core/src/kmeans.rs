//! Seeded minibatch k-means with k-means++ initialization and full-batch
//! Lloyd refinement.
//!
//! Minibatch steps follow the per-center learning-rate scheme: each
//! center moves toward a sampled point by `1 / assignment_count`. A short
//! full-batch refinement pass afterwards polishes the centers; its
//! objective is nonincreasing epoch over epoch. Empty clusters are
//! re-seeded to the point farthest from its assigned center.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dense::{sq_dist, DenseMatrix};
use crate::error::{Error, Result};

/// Tuning for [`minibatch_kmeans`].
#[derive(Debug, Clone, Copy)]
pub struct KMeansParams {
    pub clusters: usize,
    pub batch_size: usize,
    pub steps: usize,
    /// Full-batch Lloyd epochs run after the minibatch phase.
    pub refine_epochs: usize,
    pub seed: u64,
}

impl KMeansParams {
    pub fn new(clusters: usize, seed: u64) -> Self {
        KMeansParams {
            clusters,
            batch_size: 1024,
            steps: 100,
            refine_epochs: 10,
            seed,
        }
    }
}

/// Clustering output: one label per row plus the final centers.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centers: DenseMatrix,
    /// Sum of squared distances to assigned centers.
    pub inertia: f64,
}

/// Cluster the rows of `data`. Deterministic given the seed.
pub fn minibatch_kmeans(data: &DenseMatrix, params: &KMeansParams) -> Result<KMeansFit> {
    let n = data.rows();
    let m = params.clusters;
    if m < 2 {
        return Err(Error::contract("cluster count must be at least 2"));
    }
    if m > n {
        return Err(Error::contract(format!(
            "cluster count {m} exceeds {n} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centers = kmeans_pp_init(data, m, &mut rng);

    let mut counts = vec![0u64; m];
    for _ in 0..params.steps {
        for _ in 0..params.batch_size {
            let idx = rng.random_range(0..n);
            let point = data.row(idx);
            let c = nearest_center(point, &centers);
            counts[c] += 1;
            let eta = 1.0 / counts[c] as f64;
            let center = centers.row_mut(c);
            for (ci, &pi) in center.iter_mut().zip(point) {
                *ci += eta * (pi - *ci);
            }
        }
    }

    let (mut labels, _) = assign(data, &centers);
    reseed_empty_clusters(data, &mut centers, &mut labels);
    let inertia = if params.refine_epochs > 0 {
        let history = lloyd_refine(data, &mut centers, &mut labels, params.refine_epochs);
        history.last().copied().unwrap_or(0.0)
    } else {
        assign(data, &centers).1
    };
    Ok(KMeansFit {
        labels,
        centers,
        inertia,
    })
}

/// k-means++ seeding: first center uniform, then squared-distance weighted.
fn kmeans_pp_init(data: &DenseMatrix, m: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let n = data.rows();
    let mut centers = DenseMatrix::zeros(m, data.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(data.row(first));

    let mut min_d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(data.row(i), centers.row(0)))
        .collect();
    for c in 1..m {
        let total: f64 = min_d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in min_d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining points coincide with chosen centers.
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(data.row(pick));
        for (i, slot) in min_d2.iter_mut().enumerate() {
            let d = sq_dist(data.row(i), centers.row(c));
            if d < *slot {
                *slot = d;
            }
        }
    }
    centers
}

fn nearest_center(point: &[f64], centers: &DenseMatrix) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for c in 0..centers.rows() {
        let d = sq_dist(point, centers.row(c));
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Assign every point to its nearest center. Per-point distances are
/// independent, so the parallel map is exact; the inertia sum stays
/// sequential for bit-stable totals.
fn assign(data: &DenseMatrix, centers: &DenseMatrix) -> (Vec<usize>, f64) {
    let n = data.rows();
    let pairs: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let point = data.row(i);
            let c = nearest_center(point, centers);
            (c, sq_dist(point, centers.row(c)))
        })
        .collect();
    let inertia = pairs.iter().map(|&(_, d)| d).sum();
    (pairs.into_iter().map(|(c, _)| c).collect(), inertia)
}

/// Move each empty cluster's center onto the point currently farthest from
/// its assigned center, then reassign.
fn reseed_empty_clusters(data: &DenseMatrix, centers: &mut DenseMatrix, labels: &mut Vec<usize>) {
    let m = centers.rows();
    for _ in 0..m {
        let mut sizes = vec![0usize; m];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let empty = match (0..m).find(|&c| sizes[c] == 0) {
            Some(c) => c,
            None => return,
        };
        let mut far_idx = 0usize;
        let mut far_d = -1.0f64;
        for i in 0..data.rows() {
            let d = sq_dist(data.row(i), centers.row(labels[i]));
            if d > far_d {
                far_d = d;
                far_idx = i;
            }
        }
        let point = data.row(far_idx).to_vec();
        centers.row_mut(empty).copy_from_slice(&point);
        let (new_labels, _) = assign(data, centers);
        *labels = new_labels;
    }
}

/// Full-batch Lloyd epochs; returns the inertia measured after each epoch's
/// reassignment, a nonincreasing sequence. Stops early once assignments
/// stabilize.
pub fn lloyd_refine(
    data: &DenseMatrix,
    centers: &mut DenseMatrix,
    labels: &mut Vec<usize>,
    epochs: usize,
) -> Vec<f64> {
    let m = centers.rows();
    let dim = data.cols();
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        // Means of the current assignment.
        let mut sums = vec![0.0f64; m * dim];
        let mut sizes = vec![0usize; m];
        for (i, &l) in labels.iter().enumerate() {
            sizes[l] += 1;
            let row = data.row(i);
            let acc = &mut sums[l * dim..(l + 1) * dim];
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        for c in 0..m {
            if sizes[c] == 0 {
                continue;
            }
            let inv = 1.0 / sizes[c] as f64;
            let center = centers.row_mut(c);
            let acc = &sums[c * dim..(c + 1) * dim];
            for (ci, &s) in center.iter_mut().zip(acc) {
                *ci = s * inv;
            }
        }
        let (new_labels, inertia) = assign(data, centers);
        let changed = new_labels != *labels;
        *labels = new_labels;
        reseed_empty_clusters(data, centers, labels);
        history.push(inertia);
        if !changed {
            break;
        }
    }
    if history.is_empty() {
        history.push(assign(data, centers).1);
    }
    history
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_data() -> DenseMatrix {
        // Two tight blobs around (0, 0) and (10, 10).
        let mut rows = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            rows.push(vec![rng.random::<f64>() * 0.5, rng.random::<f64>() * 0.5]);
        }
        for _ in 0..30 {
            rows.push(vec![
                10.0 + rng.random::<f64>() * 0.5,
                10.0 + rng.random::<f64>() * 0.5,
            ]);
        }
        DenseMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn separated_blobs_split_perfectly() {
        let data = blob_data();
        let fit = minibatch_kmeans(&data, &KMeansParams::new(2, 42)).unwrap();
        let first = fit.labels[0];
        assert!(fit.labels[..30].iter().all(|&l| l == first));
        assert!(fit.labels[30..].iter().all(|&l| l == 1 - first));
    }

    #[test]
    fn deterministic_given_seed() {
        let data = blob_data();
        let a = minibatch_kmeans(&data, &KMeansParams::new(4, 9)).unwrap();
        let b = minibatch_kmeans(&data, &KMeansParams::new(4, 9)).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.centers.data(), b.centers.data());
    }

    #[test]
    fn more_clusters_than_points_is_an_error() {
        let data = DenseMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(minibatch_kmeans(&data, &KMeansParams::new(3, 1)).is_err());
        assert!(minibatch_kmeans(&data, &KMeansParams::new(1, 1)).is_err());
    }

    #[test]
    fn duplicate_points_still_label_everything() {
        // Four identical points force degenerate seeding and an empty
        // cluster; every point must still end up labeled in [0, m).
        let data = DenseMatrix::from_rows(&[vec![1.0, 1.0]; 4]).unwrap();
        let fit = minibatch_kmeans(&data, &KMeansParams::new(2, 3)).unwrap();
        assert_eq!(fit.labels.len(), 4);
        assert!(fit.labels.iter().all(|&l| l < 2));
    }

    #[test]
    fn lloyd_objective_is_nonincreasing() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..80)
                .map(|_| (0..3).map(|_| rng.random::<f64>() * 4.0).collect())
                .collect();
            let data = DenseMatrix::from_rows(&rows).unwrap();
            let mut centers = kmeans_pp_init(&data, 5, &mut rng);
            let (mut labels, _) = assign(&data, &centers);
            let history = lloyd_refine(&data, &mut centers, &mut labels, 12);
            for w in history.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-9,
                    "objective rose from {} to {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn empty_cluster_reseeds_to_farthest_point() {
        let data =
            DenseMatrix::from_rows(&[vec![0.0], vec![0.1], vec![0.2], vec![50.0]]).unwrap();
        let mut centers = DenseMatrix::from_rows(&[vec![0.05], vec![1000.0]]).unwrap();
        let (mut labels, _) = assign(&data, &centers);
        reseed_empty_clusters(&data, &mut centers, &mut labels);
        let sizes = labels.iter().fold(vec![0usize; 2], |mut acc, &l| {
            acc[l] += 1;
            acc
        });
        assert!(sizes.iter().all(|&s| s > 0));
        assert_ne!(labels[0], labels[3]);
    }
}
