//! Compressed sparse row storage for the count, weight, and feature matrices.

use crate::error::{Error, Result};

/// CSR matrix with explicit values. Column indices are sorted and unique
/// within each row; stored values are never the additive identity.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy> CsrMatrix<T> {
    pub fn empty(rows: usize, cols: usize) -> Self {
        CsrMatrix {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from (row, col, value) triplets. Duplicate positions are merged
    /// with `combine`; entries equal to `zero` after merging are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, T)>,
        zero: T,
        combine: impl Fn(T, T) -> T,
    ) -> Result<Self>
    where
        T: PartialEq,
    {
        for &(r, c, _) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::contract(format!(
                    "triplet ({r}, {c}) outside {rows}x{cols}"
                )));
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                let tail = values.last_mut().expect("merge target");
                *tail = combine(*tail, v);
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        };
        m.drop_zeros(zero);
        Ok(m)
    }

    fn drop_zeros(&mut self, zero: T)
    where
        T: PartialEq,
    {
        if !self.values.contains(&zero) {
            return;
        }
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != zero {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    /// Internal constructor for callers that already hold valid CSR arrays.
    pub(crate) fn from_raw_parts(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), rows + 1);
        debug_assert_eq!(*row_ptr.last().unwrap_or(&0), col_idx.len());
        debug_assert_eq!(col_idx.len(), values.len());
        CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// Iterate stored entries as (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn map_values<U: Copy>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Transpose via two-pass counting sort; O(nnz + rows + cols).
    pub fn transpose(&self) -> CsrMatrix<T> {
        let mut row_ptr = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            row_ptr[c + 1] += 1;
        }
        for c in 0..self.cols {
            row_ptr[c + 1] += row_ptr[c];
        }
        let mut cursor = row_ptr.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = self.values.clone();
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = cursor[c];
                col_idx[slot] = r;
                values[slot] = v;
                cursor[c] += 1;
            }
        }
        CsrMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// New matrix with this sparsity pattern and the given values
    /// (one per stored entry, in storage order).
    pub fn clone_pattern_with<U: Copy>(&self, values: Vec<U>) -> CsrMatrix<U> {
        assert_eq!(values.len(), self.nnz());
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }

    /// Nonzero positions match another matrix exactly.
    pub fn same_pattern<U: Copy>(&self, other: &CsrMatrix<U>) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }
}

impl CsrMatrix<f64> {
    /// y = M x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_sort() {
        let m = CsrMatrix::from_triplets(
            2,
            3,
            vec![(1, 2, 1u32), (0, 1, 2), (1, 2, 3), (1, 0, 4)],
            0,
            |a, b| a + b,
        )
        .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(0), (&[1usize][..], &[2u32][..]));
        assert_eq!(m.row(1), (&[0usize, 2][..], &[4u32, 4][..]));
    }

    #[test]
    fn zeros_dropped_after_merge() {
        let m =
            CsrMatrix::from_triplets(1, 2, vec![(0, 0, 1i64), (0, 0, -1)], 0, |a, b| a + b)
                .unwrap();
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn out_of_bounds_rejected() {
        assert!(CsrMatrix::from_triplets(1, 1, vec![(0, 1, 1u32)], 0, |a, _| a).is_err());
    }

    #[test]
    fn transpose_round_trip() {
        let m = CsrMatrix::from_triplets(
            3,
            2,
            vec![(0, 1, 1.5f64), (2, 0, -2.0), (1, 1, 3.0)],
            0.0,
            |a, b| a + b,
        )
        .unwrap();
        let t = m.transpose();
        assert_eq!(t.rows(), 2);
        assert_eq!(t.get(1, 0), Some(1.5));
        assert_eq!(t.get(0, 2), Some(-2.0));
        assert_eq!(t.transpose(), m);
    }

    #[test]
    fn mul_vec_matches_dense() {
        let m = CsrMatrix::from_triplets(
            2,
            3,
            vec![(0, 0, 1.0f64), (0, 2, 2.0), (1, 1, 3.0)],
            0.0,
            |a, b| a + b,
        )
        .unwrap();
        let mut y = vec![0.0; 2];
        m.mul_vec(&[1.0, 2.0, 3.0], &mut y);
        assert_eq!(y, vec![7.0, 6.0]);
    }
}
