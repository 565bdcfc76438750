//! Truncated singular value decomposition of sparse linear operators.
//!
//! The default backend is Golub-Kahan-Lanczos bidiagonalization with full
//! reorthogonalization and thick restarts, which touches the operator only
//! through matrix-vector products and therefore runs in O(nnz) per step.
//! A seeded randomized subspace-iteration backend sits behind the same
//! contract for callers that prefer it.

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Anything that can act as a sparse real matrix through matvec products.
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `y = M x` with `x.len() == cols`, `y.len() == rows`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `y = M^T x` with `x.len() == rows`, `y.len() == cols`.
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix<f64> {
    fn rows(&self) -> usize {
        CsrMatrix::rows(self)
    }

    fn cols(&self) -> usize {
        CsrMatrix::cols(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y);
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for r in 0..CsrMatrix::rows(self) {
            let (cols, vals) = self.row(r);
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
    }
}

/// Which algorithm computes the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvdBackend {
    Lanczos,
    Randomized,
}

#[derive(Debug, Clone, Copy)]
pub struct SvdOptions {
    pub backend: SvdBackend,
    /// Stop once the top-k singular values move by less than this relative
    /// amount between cycles.
    pub tol: f64,
    /// Budget of bidiagonalization (or subspace) steps before giving up
    /// with a warning.
    pub max_steps: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            backend: SvdBackend::Lanczos,
            tol: 1e-8,
            max_steps: 1000,
        }
    }
}

/// Top-k singular triplets of an operator.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `rows x k` coordinates `U_k Sigma_k` of the input rows in the
    /// dominant left singular basis.
    pub coords: DenseMatrix,
    /// Nonincreasing; zero-padded past the detected rank.
    pub singular_values: Vec<f64>,
    /// `cols x k` right singular vectors.
    pub right_vectors: DenseMatrix,
    /// Number of singular values resolved above the rank cutoff.
    pub rank: usize,
    pub converged: bool,
}

/// Project the rows of `op` onto its top-`k` left singular directions.
///
/// Deterministic given `seed`. Columns are ordered by nonincreasing
/// singular value, each sign-fixed so the largest-magnitude entry of the
/// left singular vector is positive. If the operator's rank is below `k`
/// the trailing columns are zero and a warning is logged.
pub fn project_truncated_svd(
    op: &dyn LinearOperator,
    k: usize,
    seed: u64,
    opts: &SvdOptions,
) -> Result<TruncatedSvd> {
    let (m, n) = (op.rows(), op.cols());
    if k == 0 {
        return Err(Error::contract("projection dimension k must be >= 1"));
    }
    if k > m.min(n) {
        return Err(Error::contract(format!(
            "k = {k} exceeds min(rows, cols) = {}",
            m.min(n)
        )));
    }
    let mut out = match opts.backend {
        SvdBackend::Lanczos => lanczos_svd(op, k, seed, opts),
        SvdBackend::Randomized => randomized_svd(op, k, seed, opts),
    }?;
    fix_signs(&mut out);
    if out.rank < k {
        warn!(
            "requested k = {k} but operator rank is {}; trailing columns zero-padded",
            out.rank
        );
    }
    if !out.converged {
        warn!("truncated SVD stopped at the step budget before converging");
    }
    Ok(out)
}

fn unit_random(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Two rounds of classical Gram-Schmidt against `basis[..count]`.
fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>], count: usize) {
    for _ in 0..2 {
        for q in &basis[..count] {
            let dot: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
            if dot != 0.0 {
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= dot * qi;
                }
            }
        }
    }
}

/// Draw a random vector orthonormal to `basis[..count]`. Returns `None`
/// when the space is exhausted (operator rank reached).
fn fresh_direction(rng: &mut ChaCha8Rng, basis: &[Vec<f64>], count: usize, len: usize) -> Option<Vec<f64>> {
    if count >= len {
        return None;
    }
    for _ in 0..4 {
        let mut v = unit_random(rng, len);
        reorthogonalize(&mut v, basis, count);
        if normalize(&mut v) > 1e-8 {
            return Some(v);
        }
    }
    None
}

struct SmallTriplet {
    sigma: f64,
    left: Vec<f64>,  // length = factorization size
    right: Vec<f64>, // length = factorization size
}

/// Sorted singular triplets of a small dense matrix.
fn small_svd(b: &DMatrix<f64>) -> Vec<SmallTriplet> {
    let svd = b.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let vt = svd.v_t.expect("right vectors requested");
    let mut triplets: Vec<SmallTriplet> = (0..svd.singular_values.len())
        .map(|i| SmallTriplet {
            sigma: svd.singular_values[i],
            left: u.column(i).iter().copied().collect(),
            right: vt.row(i).iter().copied().collect(),
        })
        .collect();
    triplets.sort_by(|a, b| b.sigma.partial_cmp(&a.sigma).expect("finite singular values"));
    triplets
}

fn lanczos_svd(
    op: &dyn LinearOperator,
    k: usize,
    seed: u64,
    opts: &SvdOptions,
) -> Result<TruncatedSvd> {
    let (m, n) = (op.rows(), op.cols());
    let minmn = m.min(n);
    let extra = k.clamp(10, 100);
    let cap = minmn.min(k + extra);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Column bases of the factorization A V = U B.
    let mut u_basis: Vec<Vec<f64>> = Vec::with_capacity(cap);
    let mut v_basis: Vec<Vec<f64>> = Vec::with_capacity(cap + 1);
    let mut b = DMatrix::<f64>::zeros(cap, cap);
    v_basis.push(unit_random(&mut rng, n));

    let mut kept = 0usize; // restarted Ritz triplets currently in the basis
    let mut steps = 0usize;
    let mut prev_sigma: Option<Vec<f64>> = None;
    let mut scale = 0.0f64;
    let mut exhausted = false;
    let mut converged = false;
    let mut boundary_beta;
    let mut boundary_v: Option<Vec<f64>>;

    'outer: loop {
        // Expand the factorization from `kept` columns up to `size`.
        let mut size = cap;
        let mut j = kept;
        // Left vector paired with the continuation right vector: subtract
        // the already-filled entries of column j of B.
        {
            let mut z = vec![0.0; m];
            op.apply(&v_basis[j], &mut z);
            steps += 1;
            for i in 0..j {
                let c = b[(i, j)];
                if c != 0.0 {
                    for (zi, ui) in z.iter_mut().zip(&u_basis[i]) {
                        *zi -= c * ui;
                    }
                }
            }
            reorthogonalize(&mut z, &u_basis, j);
            let alpha = normalize(&mut z);
            scale = scale.max(alpha);
            if alpha <= deflation_floor(scale) {
                b[(j, j)] = 0.0;
                match fresh_direction(&mut rng, &u_basis, j, m) {
                    Some(v) => z = v,
                    None => {
                        exhausted = true;
                        size = j;
                    }
                }
            } else {
                b[(j, j)] = alpha;
            }
            if !exhausted {
                u_basis.truncate(j);
                u_basis.push(z);
            }
        }

        while !exhausted && j + 1 < size {
            // w = A^T u_j - alpha_j v_j -> beta_j, v_{j+1}
            let mut w = vec![0.0; n];
            op.apply_transpose(&u_basis[j], &mut w);
            steps += 1;
            let alpha = b[(j, j)];
            for (wi, vi) in w.iter_mut().zip(&v_basis[j]) {
                *wi -= alpha * vi;
            }
            reorthogonalize(&mut w, &v_basis, j + 1);
            let beta = normalize(&mut w);
            scale = scale.max(beta);
            if beta <= deflation_floor(scale) {
                b[(j, j + 1)] = 0.0;
                match fresh_direction(&mut rng, &v_basis, j + 1, n) {
                    Some(v) => w = v,
                    None => {
                        exhausted = true;
                        size = j + 1;
                        break;
                    }
                }
            } else {
                b[(j, j + 1)] = beta;
            }
            v_basis.truncate(j + 1);
            v_basis.push(w);

            // z = A v_{j+1} - beta_j u_j -> alpha_{j+1}, u_{j+1}
            let mut z = vec![0.0; m];
            op.apply(&v_basis[j + 1], &mut z);
            steps += 1;
            let beta = b[(j, j + 1)];
            if beta != 0.0 {
                for (zi, ui) in z.iter_mut().zip(&u_basis[j]) {
                    *zi -= beta * ui;
                }
            }
            reorthogonalize(&mut z, &u_basis, j + 1);
            let alpha = normalize(&mut z);
            scale = scale.max(alpha);
            if alpha <= deflation_floor(scale) {
                b[(j + 1, j + 1)] = 0.0;
                match fresh_direction(&mut rng, &u_basis, j + 1, m) {
                    Some(v) => z = v,
                    None => {
                        exhausted = true;
                        size = j + 1;
                        break;
                    }
                }
            } else {
                b[(j + 1, j + 1)] = alpha;
            }
            u_basis.truncate(j + 1);
            u_basis.push(z);
            j += 1;
        }

        if size == 0 {
            // Zero operator: nothing to resolve.
            return Ok(zero_result(m, n, k));
        }

        // Boundary half-step: A^T u_{size-1} residual drives restarts and
        // residual estimates.
        {
            let mut w = vec![0.0; n];
            op.apply_transpose(&u_basis[size - 1], &mut w);
            steps += 1;
            let alpha = b[(size - 1, size - 1)];
            for (wi, vi) in w.iter_mut().zip(&v_basis[size - 1]) {
                *wi -= alpha * vi;
            }
            reorthogonalize(&mut w, &v_basis, size);
            boundary_beta = normalize(&mut w);
            boundary_v = if boundary_beta > deflation_floor(scale) {
                Some(w)
            } else {
                boundary_beta = 0.0;
                None
            };
        }

        let block = b.view((0, 0), (size, size)).into_owned();
        let triplets = small_svd(&block);
        let kk = k.min(size);
        let sigma: Vec<f64> = triplets.iter().take(kk).map(|t| t.sigma).collect();
        let sigma_max = sigma.first().copied().unwrap_or(0.0);

        let max_residual = triplets
            .iter()
            .take(kk)
            .map(|t| boundary_beta * t.left[size - 1].abs())
            .fold(0.0f64, f64::max);
        let sigma_moved = prev_sigma.as_ref().map_or(f64::INFINITY, |prev| {
            sigma
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        });
        let sigma_floor = sigma_max.max(f64::MIN_POSITIVE);
        if exhausted
            || max_residual <= 1e-10 * sigma_floor
            || sigma_moved <= opts.tol * sigma_floor
        {
            converged = true;
        }

        if converged || steps >= opts.max_steps || size >= minmn {
            if steps >= opts.max_steps && !converged {
                // Fall through and return the best estimate found so far.
            } else {
                converged = true;
            }
            return Ok(assemble(
                op, k, &triplets, &u_basis, &v_basis, size, converged,
            ));
        }
        prev_sigma = Some(sigma);

        // Thick restart: keep the top-k Ritz triplets plus the boundary
        // vector as the continuation direction.
        let keep = k.min(size.saturating_sub(1));
        let mut new_u: Vec<Vec<f64>> = Vec::with_capacity(keep);
        let mut new_v: Vec<Vec<f64>> = Vec::with_capacity(keep + 1);
        for t in triplets.iter().take(keep) {
            new_u.push(combine(&u_basis, &t.left, size, m));
            new_v.push(combine(&v_basis, &t.right, size, n));
        }
        let continuation = match boundary_v {
            Some(v) => v,
            None => match fresh_direction(&mut rng, &new_v, keep, n) {
                Some(v) => v,
                None => {
                    return Ok(assemble(
                        op, k, &triplets, &u_basis, &v_basis, size, true,
                    ));
                }
            },
        };
        new_v.push(continuation);
        b.fill(0.0);
        for (i, t) in triplets.iter().take(keep).enumerate() {
            b[(i, i)] = t.sigma;
            b[(i, keep)] = boundary_beta * t.left[size - 1];
        }
        u_basis = new_u;
        v_basis = new_v;
        kept = keep;
        if steps >= opts.max_steps {
            // Budget exhausted right at a restart boundary.
            let block = b.view((0, 0), (keep.max(1), keep.max(1))).into_owned();
            let triplets = small_svd(&block);
            return Ok(assemble(
                op, k, &triplets, &u_basis, &v_basis, keep, false,
            ));
        }
        continue 'outer;
    }
}

fn deflation_floor(scale: f64) -> f64 {
    if scale == 0.0 {
        1e-300
    } else {
        scale * 1e-13
    }
}

/// Expand a small Ritz vector into the full space: `basis * coeffs`.
fn combine(basis: &[Vec<f64>], coeffs: &[f64], size: usize, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (q, &c) in basis[..size].iter().zip(coeffs) {
        if c != 0.0 {
            for (oi, qi) in out.iter_mut().zip(q) {
                *oi += c * qi;
            }
        }
    }
    out
}

fn zero_result(m: usize, n: usize, k: usize) -> TruncatedSvd {
    TruncatedSvd {
        coords: DenseMatrix::zeros(m, k),
        singular_values: vec![0.0; k],
        right_vectors: DenseMatrix::zeros(n, k),
        rank: 0,
        converged: true,
    }
}

fn assemble(
    op: &dyn LinearOperator,
    k: usize,
    triplets: &[SmallTriplet],
    u_basis: &[Vec<f64>],
    v_basis: &[Vec<f64>],
    size: usize,
    converged: bool,
) -> TruncatedSvd {
    let (m, n) = (op.rows(), op.cols());
    let mut coords = DenseMatrix::zeros(m, k);
    let mut right = DenseMatrix::zeros(n, k);
    let mut singular_values = vec![0.0; k];
    let sigma_max = triplets.first().map_or(0.0, |t| t.sigma);
    let rank_floor = sigma_max * 1e-12;
    let mut rank = 0usize;
    for (i, t) in triplets.iter().take(k.min(size)).enumerate() {
        if t.sigma <= rank_floor || t.sigma == 0.0 {
            break;
        }
        rank = i + 1;
        singular_values[i] = t.sigma;
        let u_full = combine(u_basis, &t.left, size, m);
        let v_full = combine(v_basis, &t.right, size, n);
        for (r, &val) in u_full.iter().enumerate() {
            coords.set(r, i, val * t.sigma);
        }
        for (r, &val) in v_full.iter().enumerate() {
            right.set(r, i, val);
        }
    }
    TruncatedSvd {
        coords,
        singular_values,
        right_vectors: right,
        rank,
        converged,
    }
}

/// Randomized block subspace iteration, iterated to the same tolerance as
/// the Lanczos backend rather than a fixed small power count.
fn randomized_svd(
    op: &dyn LinearOperator,
    k: usize,
    seed: u64,
    opts: &SvdOptions,
) -> Result<TruncatedSvd> {
    use rand_distr::{Distribution, StandardNormal};

    let (m, n) = (op.rows(), op.cols());
    let minmn = m.min(n);
    let sample = minmn.min(k + 10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Q: m x sample orthonormal estimate of the dominant column space.
    let omega = DMatrix::<f64>::from_fn(n, sample, |_, _| StandardNormal.sample(&mut rng));
    let mut y = DMatrix::<f64>::zeros(m, sample);
    apply_block(op, &omega, &mut y, false);
    let mut q = orthonormal_columns(y);

    let mut prev_sigma: Option<Vec<f64>> = None;
    let mut converged = false;
    let max_cycles = opts.max_steps.max(1);
    let mut w = DMatrix::<f64>::zeros(n, q.ncols());
    for _ in 0..max_cycles {
        apply_block(op, &q, &mut w, true);
        let sigma_probe = column_norms(&w);
        let sigma_max = sigma_probe.iter().cloned().fold(0.0f64, f64::max);
        if let Some(prev) = &prev_sigma {
            let moved = sigma_probe
                .iter()
                .take(k)
                .zip(prev.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if moved <= opts.tol * sigma_max.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        prev_sigma = Some(sigma_probe.iter().take(k).copied().collect());
        let z = orthonormal_columns(w.clone());
        let mut y = DMatrix::<f64>::zeros(m, z.ncols());
        apply_block(op, &z, &mut y, false);
        q = orthonormal_columns(y);
        if q.ncols() == 0 {
            return Ok(zero_result(m, n, k));
        }
    }

    // Factor the projected matrix: A ~ Q (R^T) W_hat^T.
    apply_block(op, &q, &mut w, true);
    let qr = w.clone().qr();
    let w_hat = qr.q();
    let r_t = qr.r().transpose();
    let svd = r_t.svd(true, true);
    let p = svd.u.expect("u");
    let g_t = svd.v_t.expect("v_t");
    let mut triplets: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i))
        .collect();
    triplets.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));

    let mut coords = DenseMatrix::zeros(m, k);
    let mut right = DenseMatrix::zeros(n, k);
    let mut singular_values = vec![0.0; k];
    let sigma_max = triplets.first().map_or(0.0, |t| t.0);
    let rank_floor = sigma_max * 1e-12;
    let mut rank = 0usize;
    for (out_i, &(sigma, idx)) in triplets.iter().take(k).enumerate() {
        if sigma <= rank_floor || sigma == 0.0 {
            break;
        }
        rank = out_i + 1;
        singular_values[out_i] = sigma;
        let u_col = &q * p.column(idx);
        for r in 0..m {
            coords.set(r, out_i, u_col[r] * sigma);
        }
        let v_col = &w_hat * g_t.row(idx).transpose();
        for r in 0..n {
            right.set(r, out_i, v_col[r]);
        }
    }
    Ok(TruncatedSvd {
        coords,
        singular_values,
        right_vectors: right,
        rank,
        converged,
    })
}

/// `out = M * block` or `out = M^T * block`, column by column.
fn apply_block(op: &dyn LinearOperator, block: &DMatrix<f64>, out: &mut DMatrix<f64>, transpose: bool) {
    let out_len = if transpose { op.cols() } else { op.rows() };
    if out.nrows() != out_len || out.ncols() != block.ncols() {
        *out = DMatrix::zeros(out_len, block.ncols());
    }
    let mut x = vec![0.0; block.nrows()];
    let mut y = vec![0.0; out_len];
    for c in 0..block.ncols() {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = block[(i, c)];
        }
        if transpose {
            op.apply_transpose(&x, &mut y);
        } else {
            op.apply(&x, &mut y);
        }
        for (i, &yi) in y.iter().enumerate() {
            out[(i, c)] = yi;
        }
    }
}

fn orthonormal_columns(m: DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.qr();
    qr.q()
}

fn column_norms(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// Fix each column's sign so the largest-magnitude entry of the left
/// singular vector is positive, making output comparable across backends.
fn fix_signs(svd: &mut TruncatedSvd) {
    for c in 0..svd.coords.cols() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for r in 0..svd.coords.rows() {
            let a = svd.coords.get(r, c).abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if best_abs > 0.0 && svd.coords.get(best, c) < 0.0 {
            for r in 0..svd.coords.rows() {
                let v = svd.coords.get(r, c);
                svd.coords.set(r, c, -v);
            }
            for r in 0..svd.right_vectors.rows() {
                let v = svd.right_vectors.get(r, c);
                svd.right_vectors.set(r, c, -v);
            }
        }
    }
}
