//! Matrix Market (`.mtx`) reading and writing.
//!
//! Coordinate files load as sparse matrices and array files as dense ones.
//! Values are written in shortest round-trip form, so write → read is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CMat, ComplexMatrix, SparseMatrix, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

struct Header {
    layout: Layout,
    field: Field,
    symmetry: Symmetry,
}

fn parse_header(line: &str) -> std::result::Result<Header, String> {
    let words: Vec<String> = line.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(format!("bad header line {line:?}"));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(format!("unsupported format {other:?}")),
    };
    let field = match words[3].as_str() {
        "real" | "double" => Field::Real,
        "complex" => Field::Complex,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(format!("unsupported field {other:?}")),
    };
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return Err(format!("unsupported symmetry {other:?}")),
    };
    if layout == Layout::Array && field == Field::Pattern {
        return Err("pattern field requires coordinate format".into());
    }
    Ok(Header {
        layout,
        field,
        symmetry,
    })
}

fn parse_value<'a>(field: Field, tok: &mut impl Iterator<Item = &'a str>) -> std::result::Result<C64, String> {
    let mut next = || -> std::result::Result<f64, String> {
        let t = tok.next().ok_or("missing value")?;
        t.parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"))
    };
    Ok(match field {
        Field::Pattern => C64::new(1.0, 0.0),
        Field::Real | Field::Integer => C64::new(next()?, 0.0),
        Field::Complex => {
            let re = next()?;
            C64::new(re, next()?)
        }
    })
}

/// Parses Matrix Market text.
pub fn parse(text: &str) -> std::result::Result<ComplexMatrix, String> {
    let mut lines = text.lines();
    let header = parse_header(lines.next().ok_or("empty file")?)?;
    let mut body = lines.filter(|l| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let size_line = body.next().ok_or("missing size line")?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| format!("bad size {t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;

    let mirror = |v: C64| match header.symmetry {
        Symmetry::General | Symmetry::Symmetric => v,
        Symmetry::SkewSymmetric => -v,
        Symmetry::Hermitian => v.conj(),
    };

    match header.layout {
        Layout::Coordinate => {
            let [nrows, ncols, nnz] = dims[..] else {
                return Err(format!("coordinate size line needs 3 integers, got {size_line:?}"));
            };
            let mut triplets = Vec::with_capacity(nnz);
            for k in 0..nnz {
                let line = body.next().ok_or_else(|| format!("expected {nnz} entries, found {k}"))?;
                let mut tok = line.split_whitespace();
                let mut idx = || -> std::result::Result<usize, String> {
                    let t = tok.next().ok_or("missing index")?;
                    let v = t.parse::<usize>().map_err(|e| format!("bad index {t:?}: {e}"))?;
                    v.checked_sub(1).ok_or_else(|| "indices are 1-based".to_string())
                };
                let (i, j) = (idx()?, idx()?);
                let v = parse_value(header.field, &mut tok)?;
                triplets.push((i, j, v));
                if header.symmetry != Symmetry::General && i != j {
                    triplets.push((j, i, mirror(v)));
                }
            }
            SparseMatrix::from_triplets(nrows, ncols, triplets)
                .map(ComplexMatrix::Sparse)
                .map_err(|e| e.to_string())
        }
        Layout::Array => {
            let [nrows, ncols] = dims[..] else {
                return Err(format!("array size line needs 2 integers, got {size_line:?}"));
            };
            let mut m = CMat::zeros(nrows, ncols);
            let mut tokens = body.flat_map(|l| l.split_whitespace());
            for j in 0..ncols {
                let start = if header.symmetry == Symmetry::General { 0 } else { j };
                for i in start..nrows {
                    let v = parse_value(header.field, &mut tokens)?;
                    m[(i, j)] = v;
                    if header.symmetry != Symmetry::General && i != j {
                        m[(j, i)] = mirror(v);
                    }
                }
            }
            Ok(ComplexMatrix::Dense(m))
        }
    }
}

pub fn read(path: &Path) -> Result<ComplexMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text).map_err(|m| Error::parse(path, m))
}

fn push_value(out: &mut String, v: C64, complex: bool) {
    if complex {
        let _ = write!(out, "{:e} {:e}", v.re, v.im);
    } else {
        let _ = write!(out, "{:e}", v.re);
    }
}

/// Coordinate/general text for a sparse matrix; `real` when every entry is real.
pub fn format_sparse(m: &SparseMatrix) -> String {
    let complex = m.values().iter().any(|v| v.im != 0.0);
    let mut out = format!(
        "%%MatrixMarket matrix coordinate {} general\n{} {} {}\n",
        if complex { "complex" } else { "real" },
        m.nrows(),
        m.ncols(),
        m.nnz()
    );
    for (i, j, v) in m.triplets() {
        let _ = write!(out, "{} {} ", i + 1, j + 1);
        push_value(&mut out, v, complex);
        out.push('\n');
    }
    out
}

/// Array/general text (column-major) for a dense matrix.
pub fn format_dense(m: &CMat) -> String {
    let complex = m.iter().any(|v| v.im != 0.0);
    let mut out = format!(
        "%%MatrixMarket matrix array {} general\n{} {}\n",
        if complex { "complex" } else { "real" },
        m.nrows(),
        m.ncols()
    );
    for v in m.iter() {
        push_value(&mut out, *v, complex);
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, m: &ComplexMatrix) -> Result<()> {
    let text = match m {
        ComplexMatrix::Dense(d) => format_dense(d),
        ComplexMatrix::Sparse(s) => format_sparse(s),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_dense(path: &Path, m: &CMat) -> Result<()> {
    fs::write(path, format_dense(m)).map_err(|e| Error::io(path, e))
}

/// Reads any Matrix Market file as a dense matrix.
pub fn read_dense(path: &Path) -> Result<CMat> {
    read(path).map(|m| m.to_dense())
}
