//! Matrix Market (coordinate) import/export for the adjacency and
//! attribute matrices. Indices on disk are 1-based per the format.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graphio::{AttributeMatrix, IdMap, SparseAdjacency};
use crate::sparse::CsrMatrix;

pub fn write_adjacency<W: Write>(a: &SparseAdjacency, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate pattern general")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for (s, d) in a.edges() {
        writeln!(w, "{} {}", s + 1, d + 1)?;
    }
    Ok(())
}

pub fn write_attributes<W: Write>(x: &AttributeMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate integer general")?;
    writeln!(w, "{} {} {}", x.n(), x.d(), x.nnz())?;
    for (r, c, v) in x.counts().iter() {
        writeln!(w, "{} {} {}", r + 1, c + 1, v)?;
    }
    Ok(())
}

struct Header {
    rows: usize,
    cols: usize,
    nnz: usize,
    pattern: bool,
}

fn read_header<R: BufRead>(reader: &mut R, lineno: &mut usize) -> Result<Header> {
    let mut banner = String::new();
    reader.read_line(&mut banner)?;
    *lineno += 1;
    let banner_lc = banner.to_ascii_lowercase();
    if !banner_lc.starts_with("%%matrixmarket matrix coordinate") {
        return Err(Error::parse(
            *lineno,
            "expected a MatrixMarket coordinate banner",
        ));
    }
    let pattern = banner_lc.contains("pattern");
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::parse(*lineno, "missing size line"));
        }
        *lineno += 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let dims: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(*lineno, "bad size line")))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::parse(*lineno, "size line needs rows cols nnz"));
        }
        return Ok(Header {
            rows: dims[0],
            cols: dims[1],
            nnz: dims[2],
            pattern,
        });
    }
}

/// Read a pattern-format adjacency matrix. Node names become the decimal
/// row indices since the format carries no identifiers.
pub fn read_adjacency<R: BufRead>(mut reader: R) -> Result<SparseAdjacency> {
    let mut lineno = 0usize;
    let header = read_header(&mut reader, &mut lineno)?;
    if header.rows != header.cols {
        return Err(Error::parse(lineno, "adjacency matrix must be square"));
    }
    let mut pairs = Vec::with_capacity(header.nnz);
    for line in reader.lines() {
        let line = line?;
        lineno += 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (i, j) = match (it.next(), it.next()) {
            (Some(i), Some(j)) => (i, j),
            _ => return Err(Error::parse(lineno, "expected row col")),
        };
        let i: usize = i
            .parse()
            .map_err(|_| Error::parse(lineno, "bad row index"))?;
        let j: usize = j
            .parse()
            .map_err(|_| Error::parse(lineno, "bad col index"))?;
        if i == 0 || j == 0 || i > header.rows || j > header.cols {
            return Err(Error::parse(lineno, "index outside matrix"));
        }
        pairs.push((i - 1, j - 1));
    }
    if pairs.len() != header.nnz {
        return Err(Error::parse(
            lineno,
            format!("expected {} entries, found {}", header.nnz, pairs.len()),
        ));
    }
    let (a, _) = SparseAdjacency::from_pairs(header.rows, pairs, IdMap::numeric(header.rows))?;
    Ok(a)
}

/// Read an integer-format attribute matrix. Attribute names become the
/// decimal column indices.
pub fn read_attributes<R: BufRead>(mut reader: R) -> Result<AttributeMatrix> {
    let mut lineno = 0usize;
    let header = read_header(&mut reader, &mut lineno)?;
    let mut triplets = Vec::with_capacity(header.nnz);
    for line in reader.lines() {
        let line = line?;
        lineno += 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let expected = if header.pattern { 2 } else { 3 };
        if toks.len() != expected {
            return Err(Error::parse(lineno, "wrong entry arity"));
        }
        let i: usize = toks[0]
            .parse()
            .map_err(|_| Error::parse(lineno, "bad row index"))?;
        let j: usize = toks[1]
            .parse()
            .map_err(|_| Error::parse(lineno, "bad col index"))?;
        let v: u32 = if header.pattern {
            1
        } else {
            toks[2]
                .parse()
                .map_err(|_| Error::parse(lineno, "bad count"))?
        };
        if i == 0 || j == 0 || i > header.rows || j > header.cols {
            return Err(Error::parse(lineno, "index outside matrix"));
        }
        triplets.push((i - 1, j - 1, v));
    }
    if triplets.len() != header.nnz {
        return Err(Error::parse(
            lineno,
            format!("expected {} entries, found {}", header.nnz, triplets.len()),
        ));
    }
    let counts = CsrMatrix::from_triplets(header.rows, header.cols, triplets, 0, |a, b| a + b)?;
    Ok(AttributeMatrix::new(counts, IdMap::numeric(header.cols)))
}
