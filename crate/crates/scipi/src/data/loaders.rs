//! Matrix file loaders: dense CSV and Matrix Market.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Hard cap on loaded matrix entries, to fail early on absurd sizes.
pub const MAX_ENTRIES: usize = 10_000_000;

/// Load a dense comma-separated matrix. Every row must have the same
/// number of columns; `skip_header` drops the first non-empty line.
/// Empty lines are ignored, so trailing newlines are harmless.
pub fn load_dense_csv(path: &Path, skip_header: bool) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    let mut seen_header = !skip_header;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !seen_header {
            seen_header = true;
            continue;
        }
        let mut row = Vec::new();
        for (colno, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {}, column {}: cannot parse {:?} as a number",
                    path.display(),
                    lineno + 1,
                    colno + 1,
                    field.trim()
                ))
            })?;
            row.push(v);
        }
        if rows.is_empty() {
            width = row.len();
        } else if row.len() != width {
            return Err(Error::Parse(format!(
                "{}: line {}: expected {} columns, found {}",
                path.display(),
                lineno + 1,
                width,
                row.len()
            )));
        }
        rows.push(row);
        if rows.len() * width > MAX_ENTRIES {
            return Err(Error::Input(format!(
                "{}: matrix exceeds the {} entry limit",
                path.display(),
                MAX_ENTRIES
            )));
        }
    }
    if rows.is_empty() || width == 0 {
        return Err(Error::Input(format!(
            "{}: no data rows found",
            path.display()
        )));
    }
    let mut out = Array2::zeros((rows.len(), width));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[[i, j]] = *v;
        }
    }
    Ok(out)
}

/// Load a Matrix Market file into a dense matrix.
///
/// Supports the `coordinate` and `array` formats with `real` or
/// `integer` fields (integers are read as floats) and `general` or
/// `symmetric` symmetry. Symmetric files store the lower triangle;
/// entries are mirrored on load. Complex, pattern, Hermitian and
/// skew-symmetric files are rejected as unsupported. Unset coordinate
/// entries are zero.
pub fn load_matrix_market(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5 || !tokens[0].eq_ignore_ascii_case("%%MatrixMarket") || tokens[1] != "matrix"
    {
        return Err(Error::Parse(format!(
            "{}: missing %%MatrixMarket matrix header",
            path.display()
        )));
    }
    let format = tokens[2].to_ascii_lowercase();
    let field = tokens[3].to_ascii_lowercase();
    let symmetry = tokens[4].to_ascii_lowercase();
    if format != "coordinate" && format != "array" {
        return Err(Error::Unsupported(format!(
            "{}: unknown format {:?}",
            path.display(),
            format
        )));
    }
    match field.as_str() {
        "real" | "integer" => {}
        other => {
            return Err(Error::Unsupported(format!(
                "{}: field {:?} is not supported (only real and integer)",
                path.display(),
                other
            )));
        }
    }
    let symmetric = match symmetry.as_str() {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(Error::Unsupported(format!(
                "{}: symmetry {:?} is not supported (only general and symmetric)",
                path.display(),
                other
            )));
        }
    };

    // Size line: first non-comment, non-empty line.
    let mut size_line = None;
    for (lineno, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        size_line = Some((lineno, line));
        break;
    }
    let (size_lineno, size_line) =
        size_line.ok_or_else(|| Error::Parse(format!("{}: missing size line", path.display())))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {}: bad size value {:?}",
                    path.display(),
                    size_lineno + 1,
                    t
                ))
            })
        })
        .collect::<Result<_>>()?;

    let expect_dims = if format == "coordinate" { 3 } else { 2 };
    if dims.len() != expect_dims {
        return Err(Error::Parse(format!(
            "{}: line {}: size line needs {} values, found {}",
            path.display(),
            size_lineno + 1,
            expect_dims,
            dims.len()
        )));
    }
    let (nrows, ncols) = (dims[0], dims[1]);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Input(format!(
            "{}: matrix dimensions must be positive",
            path.display()
        )));
    }
    if nrows.saturating_mul(ncols) > MAX_ENTRIES {
        return Err(Error::Input(format!(
            "{}: matrix exceeds the {} entry limit",
            path.display(),
            MAX_ENTRIES
        )));
    }
    if symmetric && nrows != ncols {
        return Err(Error::Parse(format!(
            "{}: symmetric matrices must be square, got {}x{}",
            path.display(),
            nrows,
            ncols
        )));
    }

    let mut out = Array2::zeros((nrows, ncols));
    if format == "coordinate" {
        let nnz = dims[2];
        if nnz > MAX_ENTRIES {
            return Err(Error::Input(format!(
                "{}: entry count exceeds the {} limit",
                path.display(),
                MAX_ENTRIES
            )));
        }
        let mut seen = vec![false; nrows * ncols];
        let mut count = 0usize;
        for (lineno, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!(
                    "{}: line {}: coordinate entries need 'row col value'",
                    path.display(),
                    lineno + 1
                )));
            }
            let i: usize = parts[0].parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {}: bad row index {:?}",
                    path.display(),
                    lineno + 1,
                    parts[0]
                ))
            })?;
            let j: usize = parts[1].parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {}: bad column index {:?}",
                    path.display(),
                    lineno + 1,
                    parts[1]
                ))
            })?;
            let v: f64 = parts[2].parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {}: bad value {:?}",
                    path.display(),
                    lineno + 1,
                    parts[2]
                ))
            })?;
            if i < 1 || i > nrows || j < 1 || j > ncols {
                return Err(Error::Parse(format!(
                    "{}: line {}: index ({}, {}) outside {}x{} (indices are 1-based)",
                    path.display(),
                    lineno + 1,
                    i,
                    j,
                    nrows,
                    ncols
                )));
            }
            if symmetric && j > i {
                return Err(Error::Parse(format!(
                    "{}: line {}: symmetric files store the lower triangle, got ({}, {})",
                    path.display(),
                    lineno + 1,
                    i,
                    j
                )));
            }
            let flat = (i - 1) * ncols + (j - 1);
            if seen[flat] {
                return Err(Error::Parse(format!(
                    "{}: line {}: duplicate entry ({}, {})",
                    path.display(),
                    lineno + 1,
                    i,
                    j
                )));
            }
            seen[flat] = true;
            out[[i - 1, j - 1]] = v;
            if symmetric && i != j {
                out[[j - 1, i - 1]] = v;
            }
            count += 1;
        }
        if count != nnz {
            return Err(Error::Parse(format!(
                "{}: size line promises {} entries, file has {}",
                path.display(),
                nnz,
                count
            )));
        }
    } else {
        // Array format: dense column-major values, lower triangle only
        // when symmetric.
        let mut values = Vec::new();
        for (lineno, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| {
                    Error::Parse(format!(
                        "{}: line {}: bad value {:?}",
                        path.display(),
                        lineno + 1,
                        tok
                    ))
                })?;
                values.push(v);
            }
        }
        let expected = if symmetric {
            ncols * (ncols + 1) / 2
        } else {
            nrows * ncols
        };
        if values.len() != expected {
            return Err(Error::Parse(format!(
                "{}: array format expects {} values, found {}",
                path.display(),
                expected,
                values.len()
            )));
        }
        let mut it = values.into_iter();
        for j in 0..ncols {
            let start = if symmetric { j } else { 0 };
            for i in start..nrows {
                let v = it.next().expect("counted above");
                out[[i, j]] = v;
                if symmetric && i != j {
                    out[[j, i]] = v;
                }
            }
        }
    }
    Ok(out)
}
