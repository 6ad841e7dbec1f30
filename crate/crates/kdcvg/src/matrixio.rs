//! Row-major matrix <-> nested-`Vec` conversion shared by the JSON artifact
//! formats (velocity models, attention parameters).

use ndarray::Array2;

use crate::error::{Error, Result};

/// Flattens a dense matrix into row vectors for JSON serialization.
pub(crate) fn rows_of(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

/// Rebuilds a dense matrix from row vectors, rejecting ragged input.
///
/// `what` names the field in error messages so a malformed artifact points at
/// the offending component.
pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut flat = Vec::with_capacity(nrows * ncols);
    for row in rows {
        if row.len() != ncols {
            return Err(Error::ShapeMismatch(format!("ragged rows in {what}")));
        }
        flat.extend_from_slice(row);
    }
    Array2::from_shape_vec((nrows, ncols), flat)
        .map_err(|e| Error::ShapeMismatch(format!("{what}: {e}")))
}
