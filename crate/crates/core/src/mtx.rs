//! Matrix Market (coordinate) reader and writer.
//!
//! Supported headers: `matrix coordinate {real|integer|pattern} {general|symmetric}`.
//! Indices are 1-based on the wire. Symmetric files list one triangle; the
//! mirrored entries are added on read. Pattern entries read as 1.0.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::sparse::{SparseError, SparseMatrix, Triplet};

#[derive(Debug, Error)]
pub enum MtxError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Entry {
        line: usize,
        #[source]
        source: SparseError,
    },
    #[error("header declares {declared} entries but the body has {found}")]
    EntryCount { declared: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn syntax(line: usize, msg: impl Into<String>) -> MtxError {
    MtxError::Syntax { line, msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

fn parse_header(line: &str, lineno: usize) -> Result<(Field, bool), MtxError> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(syntax(lineno, "missing %%MatrixMarket banner"));
    }
    if tokens.len() != 5 {
        return Err(syntax(lineno, "banner must have 5 fields"));
    }
    if tokens[1] != "matrix" {
        return Err(syntax(lineno, format!("unsupported object `{}`", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(syntax(lineno, format!("unsupported format `{}`", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(syntax(lineno, format!("unsupported field `{other}`"))),
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(syntax(lineno, format!("unsupported symmetry `{other}`"))),
    };
    Ok((field, symmetric))
}

fn parse_index(tok: Option<&str>, bound: usize, lineno: usize, what: &str) -> Result<usize, MtxError> {
    let tok = tok.ok_or_else(|| syntax(lineno, format!("missing {what} index")))?;
    let idx: usize = tok
        .parse()
        .map_err(|_| syntax(lineno, format!("bad {what} index `{tok}`")))?;
    if idx == 0 || idx > bound {
        return Err(syntax(lineno, format!("{what} index {idx} outside 1..={bound}")));
    }
    Ok(idx - 1)
}

pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<SparseMatrix, MtxError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (lineno, banner) = lines.next().ok_or_else(|| syntax(1, "empty input"))?;
    let (field, symmetric) = parse_header(&banner?, lineno)?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    let mut found = 0usize;
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut tok = trimmed.split_whitespace();
        let Some((nrows, ncols, declared)) = size else {
            let mut dims = [0usize; 3];
            for d in dims.iter_mut() {
                let t = tok
                    .next()
                    .ok_or_else(|| syntax(lineno, "size line needs rows, columns and entries"))?;
                *d = t.parse().map_err(|_| syntax(lineno, format!("bad size field `{t}`")))?;
            }
            if symmetric && dims[0] != dims[1] {
                return Err(syntax(lineno, "symmetric matrix must be square"));
            }
            size = Some((dims[0], dims[1], dims[2]));
            entries.reserve(if symmetric { 2 * dims[2] } else { dims[2] });
            continue;
        };

        found += 1;
        if found > declared {
            // keep counting so the error reports the real body length
            continue;
        }
        let row = parse_index(tok.next(), nrows, lineno, "row")?;
        let col = parse_index(tok.next(), ncols, lineno, "column")?;
        let val = match field {
            Field::Pattern => 1.0,
            Field::Real => {
                let t = tok.next().ok_or_else(|| syntax(lineno, "missing value"))?;
                t.parse::<f32>()
                    .map_err(|_| syntax(lineno, format!("bad value `{t}`")))?
            }
            Field::Integer => {
                let t = tok.next().ok_or_else(|| syntax(lineno, "missing value"))?;
                t.parse::<i64>()
                    .map_err(|_| syntax(lineno, format!("bad integer value `{t}`")))? as f32
            }
        };
        if !val.is_finite() {
            return Err(MtxError::Entry {
                line: lineno,
                source: SparseError::NonFinite { row, col, val },
            });
        }
        entries.push(Triplet::new(row, col, val));
        if symmetric && row != col {
            entries.push(Triplet::new(col, row, val));
        }
    }

    let (nrows, ncols, declared) = size.ok_or_else(|| syntax(lineno, "missing size line"))?;
    if found != declared {
        return Err(MtxError::EntryCount { declared, found });
    }
    SparseMatrix::from_triplets(nrows, ncols, entries).map_err(|source| MtxError::Entry { line: 0, source })
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix, MtxError> {
    let file = File::open(path)?;
    parse_matrix_market(BufReader::new(file))
}

/// Writes `general real` coordinate format. `f32` values are printed in
/// shortest round-trip form so a re-read reproduces every bit.
pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut w: W) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for t in a.triplets() {
        writeln!(w, "{} {} {:?}", t.row + 1, t.col + 1, t.val)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<SparseMatrix, MtxError> {
        parse_matrix_market(s.as_bytes())
    }

    #[test]
    fn identity() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 1.0\n2 2 1.0\n").unwrap();
        assert_eq!((a.nrows(), a.ncols(), a.nnz()), (2, 2, 2));
        assert_eq!(a.values(), &[1.0, 1.0]);
    }

    #[test]
    fn symmetric_expansion() {
        let a = parse("%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 5.0\n1 1 3.0\n").unwrap();
        assert_eq!(a.nnz(), 3);
        let t: Vec<_> = a.triplets().collect();
        assert!(t.contains(&Triplet::new(0, 1, 5.0)));
        assert!(t.contains(&Triplet::new(1, 0, 5.0)));
        assert!(t.contains(&Triplet::new(0, 0, 3.0)));
    }

    #[test]
    fn pattern_and_integer_fields() {
        let a = parse("%%MatrixMarket matrix coordinate pattern general\n2 3 2\n1 3\n2 1\n").unwrap();
        assert_eq!(a.values(), &[1.0, 1.0]);
        let a = parse("%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 -7\n").unwrap();
        assert_eq!(a.values(), &[-7.0]);
    }

    #[test]
    fn duplicates_summed() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n1 1 2.5\n2 1 1\n").unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.values(), &[3.5, 1.0]);
    }

    #[test]
    fn short_body_is_an_error() {
        let err = parse("%%MatrixMarket matrix coordinate real general\n3 3 4\n1 1 1\n2 2 1\n3 3 1\n").unwrap_err();
        assert!(matches!(err, MtxError::EntryCount { declared: 4, found: 3 }));
        let err = parse("%%MatrixMarket matrix coordinate real general\n3 3 1\n1 1 1\n2 2 1\n").unwrap_err();
        assert!(matches!(err, MtxError::EntryCount { declared: 1, found: 2 }));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap_err();
        assert!(matches!(err, MtxError::Syntax { line: 3, .. }), "{err}");
        let err = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 inf\n").unwrap_err();
        assert!(matches!(err, MtxError::Entry { line: 3, .. }), "{err}");
        let err = parse("%%MatrixMarket matrix array real general\n2 2\n").unwrap_err();
        assert!(matches!(err, MtxError::Syntax { line: 1, .. }));
        let err = parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n").unwrap_err();
        assert!(matches!(err, MtxError::Syntax { line: 1, .. }));
        let err = parse("not a header\n").unwrap_err();
        assert!(matches!(err, MtxError::Syntax { line: 1, .. }));
        let err = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n").unwrap_err();
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn write_then_read() {
        let a = SparseMatrix::from_triplets(
            3,
            2,
            vec![
                Triplet::new(0, 1, 0.1),
                Triplet::new(2, 0, -3.25e-12),
                Triplet::new(1, 1, 0.0),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        assert_eq!(parse_matrix_market(&buf[..]).unwrap(), a);
    }
}
