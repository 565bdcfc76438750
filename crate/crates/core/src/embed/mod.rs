//! Node embeddings built from low-rank projection of the attribute matrix
//! and sparse message passing over the connection graph.
//!
//! The four variants differ only in the order the two operators compose
//! and in whether the adjacency is first augmented with self-loops:
//!
//! - `original`:  message passing after projecting the features
//! - `augment`:   same, over the self-loop-augmented adjacency
//! - `lanigiro`:  projection after message passing
//! - `tnemgua`:   projection after message passing with self-loops
//!
//! `directed_concat` runs `original` over both edge directions and
//! concatenates, giving `n x 2K` coordinates for graphs where one-sided
//! neighborhoods are too sparse.

pub mod svd;

use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graphio::{IdMap, SparseAdjacency};
use crate::sparse::CsrMatrix;
use svd::{project_truncated_svd, LinearOperator, SvdOptions, TruncatedSvd};

/// Embedding variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    Augment,
    Lanigiro,
    Tnemgua,
    DirectedConcat,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Augment => "augment",
            Variant::Lanigiro => "lanigiro",
            Variant::Tnemgua => "tnemgua",
            Variant::DirectedConcat => "directed_concat",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Variant::Original),
            "augment" => Ok(Variant::Augment),
            "lanigiro" => Ok(Variant::Lanigiro),
            "tnemgua" => Ok(Variant::Tnemgua),
            "directed_concat" => Ok(Variant::DirectedConcat),
            other => Err(Error::validation(format!(
                "unknown variant {other:?}; expected original, augment, lanigiro, tnemgua, or directed_concat"
            ))),
        }
    }
}

/// Variant plus projection dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub variant: Variant,
    pub k: usize,
}

/// Dense node coordinates: `n x K`, or `n x 2K` for `directed_concat`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub matrix: DenseMatrix,
    pub k: usize,
    pub variant: Variant,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn width(&self) -> usize {
        self.matrix.cols()
    }
}

/// Summation message passing: row `i` of the output is the sum of `h`'s
/// rows over the out-neighbors of `i`.
pub fn message_pass(h: &DenseMatrix, a: &SparseAdjacency) -> Result<DenseMatrix> {
    if h.rows() != a.n() {
        return Err(Error::contract(format!(
            "message passing expects {} feature rows, got {}",
            a.n(),
            h.rows()
        )));
    }
    let cols = h.cols();
    let mut out = DenseMatrix::zeros(a.n(), cols);
    // Each output row only reads from h, so row-parallelism is exact.
    out.par_rows_mut().enumerate().for_each(|(i, row)| {
        for &j in a.out_neighbors(i) {
            let src = h.row(j);
            for (acc, v) in row.iter_mut().zip(src) {
                *acc += v;
            }
        }
    });
    Ok(out)
}

/// Adjacency with `A_ii = 1` for every node. Idempotent.
pub fn augment_self_loops(a: &SparseAdjacency) -> SparseAdjacency {
    let n = a.n();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(a.nnz() + n);
    row_ptr.push(0);
    for i in 0..n {
        let neighbors = a.out_neighbors(i);
        let mut inserted = false;
        for &j in neighbors {
            if !inserted && j >= i {
                if j != i {
                    col_idx.push(i);
                }
                inserted = true;
            }
            col_idx.push(j);
        }
        if !inserted {
            col_idx.push(i);
        }
        row_ptr.push(col_idx.len());
    }
    SparseAdjacency::from_raw_parts(n, row_ptr, col_idx, a.id_map().clone())
}

/// The product `A * X` as a linear operator, never materialized; both
/// matvec directions cost O(nnz(A) + nnz(X)).
pub struct PropagatedFeatures<'a> {
    adj: &'a SparseAdjacency,
    feats: &'a CsrMatrix<f64>,
}

impl<'a> PropagatedFeatures<'a> {
    pub fn new(adj: &'a SparseAdjacency, feats: &'a CsrMatrix<f64>) -> Result<Self> {
        if adj.n() != feats.rows() {
            return Err(Error::contract(format!(
                "adjacency n = {} but feature matrix has {} rows",
                adj.n(),
                feats.rows()
            )));
        }
        Ok(PropagatedFeatures { adj, feats })
    }
}

impl LinearOperator for PropagatedFeatures<'_> {
    fn rows(&self) -> usize {
        self.adj.n()
    }

    fn cols(&self) -> usize {
        self.feats.cols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; self.feats.rows()];
        self.feats.mul_vec(x, &mut t);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &j in self.adj.out_neighbors(i) {
                acc += t[j];
            }
            *yi = acc;
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; self.adj.n()];
        for i in 0..self.adj.n() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for &j in self.adj.out_neighbors(i) {
                t[j] += xi;
            }
        }
        self.feats.apply_transpose(&t, y);
    }
}

/// Compose projection and message passing in the order the variant
/// prescribes. Deterministic given `seed`.
pub fn embed(
    a: &SparseAdjacency,
    x: &CsrMatrix<f64>,
    spec: &VariantSpec,
    seed: u64,
    opts: &SvdOptions,
) -> Result<Embedding> {
    if a.n() != x.rows() {
        return Err(Error::contract(format!(
            "adjacency n = {} but feature matrix has {} rows",
            a.n(),
            x.rows()
        )));
    }
    if spec.k == 0 || spec.k > a.n().min(x.cols()) {
        return Err(Error::contract(format!(
            "projection dimension {} outside 1..=min(n, d) = {}",
            spec.k,
            a.n().min(x.cols())
        )));
    }
    let matrix = match spec.variant {
        Variant::Original => {
            let p = project_truncated_svd(x, spec.k, seed, opts)?;
            message_pass(&p.coords, a)?
        }
        Variant::Augment => {
            let p = project_truncated_svd(x, spec.k, seed, opts)?;
            message_pass(&p.coords, &augment_self_loops(a))?
        }
        Variant::Lanigiro => {
            let op = PropagatedFeatures::new(a, x)?;
            project_truncated_svd(&op, spec.k, seed, opts)?.coords
        }
        Variant::Tnemgua => {
            let aug = augment_self_loops(a);
            let op = PropagatedFeatures::new(&aug, x)?;
            project_truncated_svd(&op, spec.k, seed, opts)?.coords
        }
        Variant::DirectedConcat => {
            return embed_directed_concat(a, x, spec.k, seed, opts);
        }
    };
    Ok(Embedding {
        matrix,
        k: spec.k,
        variant: spec.variant,
    })
}

/// `original` over both edge directions, concatenated to `n x 2K`. The
/// projection is shared; only the message-passing direction differs.
pub fn embed_directed_concat(
    a: &SparseAdjacency,
    x: &CsrMatrix<f64>,
    k: usize,
    seed: u64,
    opts: &SvdOptions,
) -> Result<Embedding> {
    if a.n() != x.rows() {
        return Err(Error::contract(format!(
            "adjacency n = {} but feature matrix has {} rows",
            a.n(),
            x.rows()
        )));
    }
    if k == 0 || k > a.n().min(x.cols()) {
        return Err(Error::contract(format!(
            "projection dimension {} outside 1..=min(n, d) = {}",
            k,
            a.n().min(x.cols())
        )));
    }
    let p = project_truncated_svd(x, k, seed, opts)?;
    let forward = message_pass(&p.coords, a)?;
    let backward = message_pass(&p.coords, &a.transpose())?;
    Ok(Embedding {
        matrix: forward.hcat(&backward)?,
        k,
        variant: Variant::DirectedConcat,
    })
}

/// Re-export of the projection entry point for callers that want raw
/// coordinates without message passing.
pub fn project(
    x: &CsrMatrix<f64>,
    k: usize,
    seed: u64,
    opts: &SvdOptions,
) -> Result<TruncatedSvd> {
    project_truncated_svd(x, k, seed, opts)
}

/// Write the embedding as an 8-byte header (n, width as little-endian u32)
/// followed by column-major little-endian doubles.
pub fn write_embedding<W: Write>(emb: &DenseMatrix, mut w: W) -> Result<()> {
    let n = u32::try_from(emb.rows())
        .map_err(|_| Error::contract("embedding rows exceed u32 range"))?;
    let k = u32::try_from(emb.cols())
        .map_err(|_| Error::contract("embedding cols exceed u32 range"))?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&k.to_le_bytes())?;
    for c in 0..emb.cols() {
        for r in 0..emb.rows() {
            w.write_all(&emb.get(r, c).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Inverse of [`write_embedding`].
pub fn read_embedding<R: Read>(mut r: R) -> Result<DenseMatrix> {
    let mut header = [0u8; 8];
    r.read_exact(&mut header)?;
    let n = u32::from_le_bytes(header[0..4].try_into().expect("4 bytes")) as usize;
    let k = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
    let mut buf = vec![0u8; n * k * 8];
    r.read_exact(&mut buf)?;
    let mut m = DenseMatrix::zeros(n, k);
    let mut offset = 0;
    for c in 0..k {
        for row in 0..n {
            let v = f64::from_le_bytes(buf[offset..offset + 8].try_into().expect("8 bytes"));
            m.set(row, c, v);
            offset += 8;
        }
    }
    Ok(m)
}

/// Export coordinates as CSV: header `node,z0,...`, one row per node.
pub fn write_embedding_csv<W: Write>(
    emb: &DenseMatrix,
    ids: &IdMap,
    mut w: W,
) -> Result<()> {
    write!(w, "node")?;
    for c in 0..emb.cols() {
        write!(w, ",z{c}")?;
    }
    writeln!(w)?;
    for r in 0..emb.rows() {
        write!(w, "{}", ids.name(r))?;
        for c in 0..emb.cols() {
            write!(w, ",{}", emb.get(r, c))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
