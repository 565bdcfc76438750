//! Scalability benchmark: generate instances across sizes, time the map
//! and flag stages, and fit wall-clock time against the nonzero count.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use tinyblock_core::embed::svd::SvdOptions;
use tinyblock_core::embed::{embed, Variant, VariantSpec};
use tinyblock_core::error::{Error, Result};
use tinyblock_core::flag::{flag_groups, GroupThresholds};
use tinyblock_core::kmeans::{minibatch_kmeans, KMeansParams};
use tinyblock_core::seeds::stage_seed;
use tinyblock_core::synthgen::{generate, GeneratorConfig};

/// One timed run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    /// nnz(A) + nnz(X) of the generated instance.
    pub nnz: usize,
    pub map_seconds: f64,
    pub flag_seconds: f64,
    pub total_seconds: f64,
}

/// Least-squares fit of total time against nnz.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub rows: Vec<BenchRow>,
    pub fit: LinearFit,
}

/// Run the map and flag stages over generated instances of each size and
/// fit runtime against nonzeros. Needs at least three size points.
pub fn bench_scaling(
    sizes: &[usize],
    instances: usize,
    k: usize,
    m: usize,
    seed: u64,
) -> Result<BenchReport> {
    if sizes.len() < 3 {
        return Err(Error::validation(
            "bench needs at least 3 sizes for a meaningful fit",
        ));
    }
    if instances == 0 {
        return Err(Error::validation("instances must be >= 1"));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        for instance in 0..instances {
            let config = GeneratorConfig::defaults(n, n);
            let gen_seed = stage_seed(seed, &format!("bench:{n}:{instance}"));
            let (a, x, _) = generate(&config, gen_seed)?;
            let nnz = a.nnz() + x.nnz();
            let features = x.to_f64();

            let map_start = Instant::now();
            let embedding = embed(
                &a,
                &features,
                &VariantSpec {
                    variant: Variant::Original,
                    k,
                },
                stage_seed(gen_seed, "embed"),
                &SvdOptions::default(),
            )?;
            let map_seconds = map_start.elapsed().as_secs_f64();

            let flag_start = Instant::now();
            let fit = minibatch_kmeans(
                &embedding.matrix,
                &KMeansParams {
                    clusters: m,
                    ..KMeansParams::new(m, stage_seed(gen_seed, "kmeans"))
                },
            )?;
            flag_groups(&fit.labels, m, &a, &GroupThresholds::default(), true)?;
            let flag_seconds = flag_start.elapsed().as_secs_f64();

            rows.push(BenchRow {
                n,
                nnz,
                map_seconds,
                flag_seconds,
                total_seconds: map_seconds + flag_seconds,
            });
        }
    }
    let fit = least_squares(&rows);
    Ok(BenchReport {
        k,
        m,
        seed,
        rows,
        fit,
    })
}

fn least_squares(rows: &[BenchRow]) -> LinearFit {
    let n = rows.len() as f64;
    let mean_x = rows.iter().map(|r| r.nnz as f64).sum::<f64>() / n;
    let mean_y = rows.iter().map(|r| r.total_seconds).sum::<f64>() / n;
    let sxx: f64 = rows
        .iter()
        .map(|r| {
            let d = r.nnz as f64 - mean_x;
            d * d
        })
        .sum();
    let sxy: f64 = rows
        .iter()
        .map(|r| (r.nnz as f64 - mean_x) * (r.total_seconds - mean_y))
        .sum();
    let syy: f64 = rows
        .iter()
        .map(|r| {
            let d = r.total_seconds - mean_y;
            d * d
        })
        .sum();
    if sxx <= f64::EPSILON {
        // Degenerate design (all sizes equal): flat fit.
        return LinearFit {
            slope: 0.0,
            intercept: mean_y,
            r_squared: if syy <= f64::EPSILON { 1.0 } else { 0.0 },
        };
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = rows
        .iter()
        .map(|r| {
            let pred = slope * r.nnz as f64 + intercept;
            let d = r.total_seconds - pred;
            d * d
        })
        .sum();
    let r_squared = if syy <= f64::EPSILON {
        1.0
    } else {
        1.0 - ss_res / syy
    };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_sizes_is_an_error() {
        assert!(bench_scaling(&[500, 700], 1, 10, 9, 1).is_err());
        assert!(bench_scaling(&[500], 1, 10, 9, 1).is_err());
    }

    #[test]
    fn fit_recovers_a_linear_relation() {
        let rows: Vec<BenchRow> = [(1000usize, 1.0f64), (2000, 2.0), (3000, 3.0)]
            .iter()
            .map(|&(nnz, t)| BenchRow {
                n: nnz,
                nnz,
                map_seconds: t,
                flag_seconds: 0.0,
                total_seconds: t,
            })
            .collect();
        let fit = least_squares(&rows);
        assert!((fit.slope - 1e-3).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_size_control_has_flat_fit() {
        let rows: Vec<BenchRow> = (0..3)
            .map(|_| BenchRow {
                n: 500,
                nnz: 1234,
                map_seconds: 0.5,
                flag_seconds: 0.1,
                total_seconds: 0.6,
            })
            .collect();
        let fit = least_squares(&rows);
        assert_eq!(fit.slope, 0.0);
        assert!((fit.intercept - 0.6).abs() < 1e-12);
    }

    #[test]
    fn small_bench_end_to_end() {
        let report = bench_scaling(&[200, 300, 400], 1, 5, 4, 3).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows.iter().all(|r| r.total_seconds > 0.0));
        assert!(report.fit.r_squared.is_finite());
    }
}
