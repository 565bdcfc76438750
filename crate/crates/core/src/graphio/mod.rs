//! Ingestion of edge lists and attribute triplets into sparse matrices,
//! isolated-node filtering, and the doubly-normalized TF-IDF transform.
//!
//! External node and attribute identifiers are opaque strings; internally
//! everything runs on dense indices assigned in first-seen order. Ingestion
//! is single-threaded and streaming; the constructed matrices are immutable
//! afterwards and safe to share across threads.

pub mod market;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Bidirectional mapping between external string ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        IdMap::default()
    }

    /// Id map whose names are the decimal indices `0..n`.
    pub fn numeric(n: usize) -> Self {
        let mut m = IdMap::new();
        for i in 0..n {
            m.insert_or_get(&i.to_string());
        }
        m
    }

    pub fn insert_or_get(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Directed binary adjacency matrix in CSR layout plus the node dictionary.
///
/// Invariants: indices in `[0, n)`, per-row column indices sorted and unique,
/// no self-loops unless added by the self-loop augmentation operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    id_map: IdMap,
}

/// Counters reported by edge-list ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeIngestStats {
    pub dropped_self_loops: usize,
    pub deduped: usize,
}

impl SparseAdjacency {
    /// Build from ordered pairs over dense indices; self-loops are dropped
    /// and duplicates merged, with both counted.
    pub fn from_pairs(
        n: usize,
        mut pairs: Vec<(usize, usize)>,
        id_map: IdMap,
    ) -> Result<(Self, EdgeIngestStats)> {
        let mut stats = EdgeIngestStats::default();
        for &(s, d) in &pairs {
            if s >= n || d >= n {
                return Err(Error::contract(format!("edge ({s}, {d}) outside 0..{n}")));
            }
        }
        let before = pairs.len();
        pairs.retain(|&(s, d)| s != d);
        stats.dropped_self_loops = before - pairs.len();
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        stats.deduped = before - pairs.len();

        let mut row_ptr = vec![0usize; n + 1];
        for &(s, _) in &pairs {
            row_ptr[s + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = pairs.into_iter().map(|(_, d)| d).collect();
        Ok((
            SparseAdjacency {
                n,
                row_ptr,
                col_idx,
                id_map,
            },
            stats,
        ))
    }

    /// Constructor for callers holding already-sorted loop-free CSR arrays.
    pub(crate) fn from_raw_parts(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        id_map: IdMap,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), n + 1);
        debug_assert_eq!(*row_ptr.last().unwrap_or(&0), col_idx.len());
        SparseAdjacency {
            n,
            row_ptr,
            col_idx,
            id_map,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn id_map(&self) -> &IdMap {
        &self.id_map
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &c in &self.col_idx {
            deg[c] += 1;
        }
        deg
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.out_neighbors(src).binary_search(&dst).is_ok()
    }

    /// Iterate all directed edges in (row, col) order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |s| self.out_neighbors(s).iter().map(move |&d| (s, d)))
    }

    /// Adjacency with every edge reversed; shares the node dictionary.
    pub fn transpose(&self) -> SparseAdjacency {
        let mut row_ptr = vec![0usize; self.n + 1];
        for &c in &self.col_idx {
            row_ptr[c + 1] += 1;
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut cursor = row_ptr.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        for (s, d) in self.edges() {
            col_idx[cursor[d]] = s;
            cursor[d] += 1;
        }
        SparseAdjacency {
            n: self.n,
            row_ptr,
            col_idx,
            id_map: self.id_map.clone(),
        }
    }
}

/// Sparse nonnegative user-by-attribute count matrix with its column
/// dictionary. Stored entries are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatrix {
    counts: CsrMatrix<u32>,
    attr_map: IdMap,
}

impl AttributeMatrix {
    pub fn new(counts: CsrMatrix<u32>, attr_map: IdMap) -> Self {
        debug_assert_eq!(counts.cols(), attr_map.len());
        AttributeMatrix { counts, attr_map }
    }

    pub fn n(&self) -> usize {
        self.counts.rows()
    }

    pub fn d(&self) -> usize {
        self.counts.cols()
    }

    pub fn nnz(&self) -> usize {
        self.counts.nnz()
    }

    pub fn counts(&self) -> &CsrMatrix<u32> {
        &self.counts
    }

    pub fn attr_map(&self) -> &IdMap {
        &self.attr_map
    }

    /// Stored counts as `f64`, e.g. to feed the embedding directly.
    pub fn to_f64(&self) -> CsrMatrix<f64> {
        self.counts.map_values(f64::from)
    }
}

/// Real-valued TF-IDF view sharing the sparsity pattern of the source
/// attribute matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfMatrix {
    weights: CsrMatrix<f64>,
}

impl TfidfMatrix {
    pub fn weights(&self) -> &CsrMatrix<f64> {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    pub fn d(&self) -> usize {
        self.weights.cols()
    }
}

/// Counters reported by attribute ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AttrIngestStats {
    pub records: usize,
    pub skipped_unknown_nodes: usize,
}

/// What to do with attribute records whose node is absent from the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownNodePolicy {
    SkipAndCount,
    Fail,
}

/// Counters reported by the TF-IDF transform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TfidfStats {
    pub empty_rows: usize,
    pub zero_support_columns: usize,
}

/// Parse a `src<ws>dst` edge list into a directed adjacency matrix.
///
/// Lines starting with `#` and blank lines are skipped. Dense indices are
/// assigned in first-seen order. With `directed = false` each line inserts
/// both orientations before deduplication.
pub fn load_edge_list<R: BufRead>(
    reader: R,
    directed: bool,
) -> Result<(SparseAdjacency, EdgeIngestStats)> {
    let mut id_map = IdMap::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (src, dst) = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(s), Some(d), None) => (s, d),
            _ => {
                return Err(Error::parse(
                    lineno + 1,
                    format!("expected two node tokens, got {line:?}"),
                ))
            }
        };
        let s = id_map.insert_or_get(src);
        let d = id_map.insert_or_get(dst);
        pairs.push((s, d));
        if !directed && s != d {
            pairs.push((d, s));
        }
    }
    if id_map.is_empty() {
        return Err(Error::EmptyInput("edge list holds no edges".to_string()));
    }
    let n = id_map.len();
    SparseAdjacency::from_pairs(n, pairs, id_map)
}

/// Write the canonical deduplicated edge list: one `src dst` pair per line,
/// sorted lexicographically by external id so the output is independent of
/// the order edges were ingested in.
pub fn write_edge_list<W: Write>(a: &SparseAdjacency, mut w: W) -> Result<()> {
    let mut lines: Vec<(&str, &str)> = a
        .edges()
        .map(|(s, d)| (a.id_map.name(s), a.id_map.name(d)))
        .collect();
    lines.sort_unstable();
    for (s, d) in lines {
        writeln!(w, "{s} {d}")?;
    }
    Ok(())
}

/// Parse `node<ws>attribute<ws>count` triplets against an existing node
/// dictionary. Counts for repeated (node, attribute) pairs are summed.
pub fn load_attributes<R: BufRead>(
    reader: R,
    id_map: &IdMap,
    policy: UnknownNodePolicy,
) -> Result<(AttributeMatrix, AttrIngestStats)> {
    let mut attr_map = IdMap::new();
    let mut triplets: Vec<(usize, usize, u32)> = Vec::new();
    let mut stats = AttrIngestStats::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (node, attr, count) = match (tokens.next(), tokens.next(), tokens.next(), tokens.next())
        {
            (Some(n), Some(a), Some(c), None) => (n, a, c),
            _ => {
                return Err(Error::parse(
                    lineno + 1,
                    format!("expected node, attribute, count, got {line:?}"),
                ))
            }
        };
        let count: u32 = count.parse().map_err(|_| {
            Error::parse(lineno + 1, format!("count {count:?} is not a positive integer"))
        })?;
        if count == 0 {
            return Err(Error::parse(lineno + 1, "count must be >= 1"));
        }
        stats.records += 1;
        let row = match id_map.get(node) {
            Some(i) => i,
            None => match policy {
                UnknownNodePolicy::SkipAndCount => {
                    stats.skipped_unknown_nodes += 1;
                    continue;
                }
                UnknownNodePolicy::Fail => {
                    return Err(Error::MissingNodes {
                        missing: vec![node.to_string()],
                    })
                }
            },
        };
        let col = attr_map.insert_or_get(attr);
        triplets.push((row, col, count));
    }
    let d = attr_map.len();
    let counts = CsrMatrix::from_triplets(id_map.len(), d, triplets, 0, |a, b| a + b)?;
    Ok((AttributeMatrix::new(counts, attr_map), stats))
}

/// Remove nodes with zero total degree, reindexing both matrices
/// consistently. Returns the external ids that were removed.
pub fn filter_isolated(
    a: &SparseAdjacency,
    x: &AttributeMatrix,
) -> Result<(SparseAdjacency, AttributeMatrix, Vec<String>)> {
    if a.n() != x.n() {
        return Err(Error::contract(format!(
            "adjacency has {} nodes but attribute matrix has {} rows",
            a.n(),
            x.n()
        )));
    }
    let in_deg = a.in_degrees();
    let keep: Vec<bool> = (0..a.n())
        .map(|i| a.out_degree(i) + in_deg[i] > 0)
        .collect();
    let mut new_index = vec![usize::MAX; a.n()];
    let mut id_map = IdMap::new();
    let mut removed = Vec::new();
    for i in 0..a.n() {
        if keep[i] {
            new_index[i] = id_map.insert_or_get(a.id_map.name(i));
        } else {
            removed.push(a.id_map.name(i).to_string());
        }
    }
    let n = id_map.len();
    let pairs = a
        .edges()
        .map(|(s, d)| (new_index[s], new_index[d]))
        .collect();
    let (fa, _) = SparseAdjacency::from_pairs(n, pairs, id_map)?;
    let triplets = x
        .counts
        .iter()
        .filter(|&(r, _, _)| keep[r])
        .map(|(r, c, v)| (new_index[r], c, v))
        .collect();
    let counts = CsrMatrix::from_triplets(n, x.d(), triplets, 0, |a, b| a + b)?;
    let fx = AttributeMatrix::new(counts, x.attr_map.clone());
    Ok((fa, fx, removed))
}

/// Presence indicator of the count matrix: entry 1 wherever a count is
/// positive. Idempotent.
pub fn binarize(x: &AttributeMatrix) -> AttributeMatrix {
    AttributeMatrix {
        counts: x.counts.map_values(|_| 1),
        attr_map: x.attr_map.clone(),
    }
}

/// Doubly-normalized TF-IDF over the stored positions of the count matrix:
/// the inverse column support `n / |{i : X_ij > 0}|` times the damped term
/// frequency `0.5 + 0.5 * X_ij / max_j' X_ij'`.
///
/// Values are computed only where `X_ij > 0`; elsewhere the weight is zero
/// so the output shares the input's sparsity pattern. Rows without any
/// attribute and columns without support are left empty and counted.
pub fn tfidf_transform(x: &AttributeMatrix) -> (TfidfMatrix, TfidfStats) {
    let n = x.n();
    let counts = &x.counts;
    let mut support = vec![0usize; x.d()];
    let mut row_max = vec![0u32; n];
    for (r, c, v) in counts.iter() {
        support[c] += 1;
        row_max[r] = row_max[r].max(v);
    }
    let stats = TfidfStats {
        empty_rows: (0..n).filter(|&i| row_max[i] == 0).count(),
        zero_support_columns: support.iter().filter(|&&s| s == 0).count(),
    };
    let weights = {
        let mut values = Vec::with_capacity(counts.nnz());
        for (r, c, v) in counts.iter() {
            let idf = n as f64 / support[c] as f64;
            let tf = 0.5 + 0.5 * f64::from(v) / f64::from(row_max[r]);
            values.push(idf * tf);
        }
        counts.clone_pattern_with(values)
    };
    (TfidfMatrix { weights }, stats)
}

#[cfg(test)]
mod tests;
