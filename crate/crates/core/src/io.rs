//! Plain-text matrix input and output.
//!
//! Two formats cover the benchmark artifacts: comma-separated values with
//! an optional header line, and the Matrix Market dense array format.
//! Values print in the shortest form that parses back to the same number,
//! so a write/read cycle is lossless for `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{cast, to_f64, Scalar};
use crate::{Matrix, Vector};

/// Writes a matrix as CSV, one row per line. An empty header slice means
/// no header line.
pub fn write_csv_matrix<T: Scalar, W: Write>(
    mut w: W,
    m: &Matrix<T>,
    header: &[&str],
) -> Result<()> {
    if !header.is_empty() {
        if header.len() != m.ncols() {
            return Err(Error::DimensionMismatch {
                context: "csv header",
                expected: m.ncols().to_string(),
                got: header.len().to_string(),
            });
        }
        writeln!(w, "{}", header.join(","))?;
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                write!(w, ",")?;
            }
            write!(w, "{}", to_f64(m[(i, j)]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a CSV matrix. A first line whose fields do not all parse as
/// numbers is taken as the header; lines that are empty or start with `#`
/// are skipped. All data rows must have the same number of fields.
pub fn read_csv_matrix<T: Scalar, R: BufRead>(r: R) -> Result<(Matrix<T>, Option<Vec<String>>)> {
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut saw_content = false;

    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let number = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(w) = width {
                    if values.len() != w {
                        return Err(Error::Parse {
                            line: number,
                            msg: format!("expected {w} fields, found {}", values.len()),
                        });
                    }
                } else {
                    width = Some(values.len());
                }
                rows.push(values.into_iter().map(cast::<T>).collect());
                saw_content = true;
            }
            Err(e) => {
                if saw_content {
                    return Err(Error::Parse {
                        line: number,
                        msg: format!("unparsable value: {e}"),
                    });
                }
                if header.is_some() {
                    return Err(Error::Parse {
                        line: number,
                        msg: "second non-numeric line before any data".to_string(),
                    });
                }
                header = Some(fields.iter().map(|s| s.to_string()).collect());
                saw_content = true;
            }
        }
    }

    if rows.is_empty() {
        return Err(Error::invalid("csv input holds no data rows"));
    }
    if let (Some(h), Some(w)) = (&header, width) {
        if h.len() != w {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header has {} fields, data rows have {w}", h.len()),
            });
        }
    }
    let ncols = width.expect("rows imply width");
    let matrix = Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    Ok((matrix, header))
}

/// Writes a matrix in the Matrix Market dense array format.
pub fn write_matrix_market<T: Scalar, W: Write>(mut w: W, m: &Matrix<T>) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    // Array format is column major.
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            writeln!(w, "{}", to_f64(m[(i, j)]))?;
        }
    }
    Ok(())
}

/// Reads a Matrix Market dense array file.
pub fn read_matrix_market<T: Scalar, R: BufRead>(r: R) -> Result<Matrix<T>> {
    let mut lines = r.lines().enumerate();
    let (_, banner) = lines
        .next()
        .ok_or_else(|| Error::invalid("empty matrix market input"))?;
    let banner = banner?;
    let tokens: Vec<String> = banner
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    let expected = ["%%matrixmarket", "matrix", "array", "real", "general"];
    if tokens.len() != expected.len() || tokens.iter().zip(expected.iter()).any(|(a, b)| a != b) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unsupported banner: {banner}"),
        });
    }

    let mut dims: Option<(usize, usize)> = None;
    let mut values: Vec<T> = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let number = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if dims.is_none() {
            let mut parts = trimmed.split_whitespace();
            let rows = parse_usize(parts.next(), number)?;
            let cols = parse_usize(parts.next(), number)?;
            if parts.next().is_some() {
                return Err(Error::Parse {
                    line: number,
                    msg: "size line has more than two fields".to_string(),
                });
            }
            dims = Some((rows, cols));
            values.reserve(rows * cols);
            continue;
        }
        for token in trimmed.split_whitespace() {
            let v: f64 = token.parse().map_err(|e| Error::Parse {
                line: number,
                msg: format!("unparsable value {token:?}: {e}"),
            })?;
            values.push(cast(v));
        }
    }

    let (rows, cols) =
        dims.ok_or_else(|| Error::invalid("matrix market input has no size line"))?;
    if values.len() != rows * cols {
        return Err(Error::invalid(format!(
            "matrix market input holds {} values, size line promises {}",
            values.len(),
            rows * cols
        )));
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| values[j * rows + i]))
}

fn parse_usize(token: Option<&str>, line: usize) -> Result<usize> {
    let token = token.ok_or(Error::Parse {
        line,
        msg: "size line is incomplete".to_string(),
    })?;
    token.parse().map_err(|e| Error::Parse {
        line,
        msg: format!("unparsable size {token:?}: {e}"),
    })
}

/// Writes a vector as a single CSV column.
pub fn write_csv_vector<T: Scalar, W: Write>(w: W, v: &Vector<T>, name: &str) -> Result<()> {
    let m = Matrix::from_fn(v.len(), 1, |i, _| v[i]);
    let header: &[&str] = if name.is_empty() { &[] } else { &[name] };
    write_csv_matrix(w, &m, header)
}

pub fn write_csv_matrix_file<T: Scalar>(path: &Path, m: &Matrix<T>, header: &[&str]) -> Result<()> {
    let file = File::create(path)?;
    write_csv_matrix(BufWriter::new(file), m, header)
}

pub fn read_csv_matrix_file<T: Scalar>(path: &Path) -> Result<(Matrix<T>, Option<Vec<String>>)> {
    let file = File::open(path)?;
    read_csv_matrix(BufReader::new(file))
}

pub fn write_matrix_market_file<T: Scalar>(path: &Path, m: &Matrix<T>) -> Result<()> {
    let file = File::create(path)?;
    write_matrix_market(BufWriter::new(file), m)
}

pub fn read_matrix_market_file<T: Scalar>(path: &Path) -> Result<Matrix<T>> {
    let file = File::open(path)?;
    read_matrix_market(BufReader::new(file))
}
