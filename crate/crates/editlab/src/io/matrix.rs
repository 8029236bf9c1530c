//! Matrix interchange: CSV of rows, full-precision values.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MATRIX_HEADER: &str = "# editlab matrix v1";

/// Read a matrix from comma-separated rows. Blank lines and `#` comments are
/// skipped; ragged rows and unparsable values are reported by line number.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let label = path.display().to_string();
    let text = super::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            let value: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::file_format(&label, line_no, format!("bad number {cell:?}")))?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::file_format(
                    &label,
                    line_no,
                    format!("row has {} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// Write a matrix in the format [`read_matrix`] reads. Values use the
/// shortest round-trip decimal form, so read-back is exact.
pub fn write_matrix(matrix: &DMatrix<f64>, path: &Path) -> Result<()> {
    if matrix.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mut out = String::from(MATRIX_HEADER);
    out.push('\n');
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| matrix[(i, j)].to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    super::write_atomic(path, out.as_bytes())
}
